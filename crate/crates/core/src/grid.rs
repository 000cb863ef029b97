//! Sample grids and seeded random sampling shared by the sampled checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed used by every sampled check unless the caller supplies one.
pub const DEFAULT_SEED: u64 = 42;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` evenly spaced points covering `[lo, hi]` (both ends included).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + h * i as f64 })
                .collect()
        }
    }
}

/// Tensor-product grid over the given ranges, `n` points per axis, in
/// row-major order (last axis fastest).
pub fn tensor(ranges: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = ranges.iter().map(|&(a, b)| linspace(a, b, n)).collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// A point drawn uniformly from the box `[lo, hi]^dim`.
pub fn uniform_point(rng: &mut impl Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..=hi)).collect()
}
