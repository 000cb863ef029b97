//! Translation actions on `Q = R^n`, their cotangent lifts and momentum maps.
//!
//! An action is given by an `n × k` generator matrix `G` with independent
//! columns: `Φ(g, q) = q + G g`. Translations have identity linearization,
//! so the lifted action moves the base point and leaves the fiber alone,
//! and the momentum map is `J(q, p) = Gᵀ p`. The group is abelian, so every
//! momentum value is fixed by the coadjoint action.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, ExprError};
use crate::forms::OneForm;
use crate::grid::{self, SampleRng};
use crate::phase_space::{Coordinates, PhasePoint};

/// Rank tolerance for generator matrices.
const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationAction {
    generators: DMatrix<f64>,
}

/// A value `μ ∈ g* ≅ R^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentumValue(pub Vec<f64>);

impl MomentumValue {
    pub fn zero(k: usize) -> Self {
        MomentumValue(vec![0.0; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }
}

impl TranslationAction {
    /// Builds the action from its generator vectors (columns of `G`).
    pub fn new(n: usize, generators: &[Vec<f64>]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("ambient dimension must be positive".into()));
        }
        for g in generators {
            if g.len() != n {
                return Err(Error::Dimension {
                    what: "generator vector",
                    expected: n,
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("generator has non-finite entries".into()));
            }
        }
        let k = generators.len();
        if k > n {
            return Err(Error::RankDeficient {
                rank: n,
                expected: k,
            });
        }
        let m = DMatrix::from_fn(n, k, |i, j| generators[j][i]);
        let rank = if k == 0 {
            0
        } else {
            m.clone().svd(false, false).rank(RANK_EPS)
        };
        if rank != k {
            return Err(Error::RankDeficient { rank, expected: k });
        }
        Ok(TranslationAction { generators: m })
    }

    /// The trivial group acting on `R^n`.
    pub fn trivial(n: usize) -> Self {
        TranslationAction {
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// Translation of the `indices` coordinates (cyclic variables).
    pub fn coordinate_axes(n: usize, indices: &[usize]) -> Result<Self> {
        let gens: Vec<Vec<f64>> = indices
            .iter()
            .map(|&i| {
                let mut g = vec![0.0; n];
                if i < n {
                    g[i] = 1.0;
                }
                g
            })
            .collect();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Invalid(format!(
                "coordinate index {bad} out of range"
            )));
        }
        Self::new(n, &gens)
    }

    pub fn n(&self) -> usize {
        self.generators.nrows()
    }

    pub fn k(&self) -> usize {
        self.generators.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn generators(&self) -> Vec<Vec<f64>> {
        (0..self.k())
            .map(|j| self.generators.column(j).iter().copied().collect())
            .collect()
    }

    fn check_group(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.k() {
            return Err(Error::Dimension {
                what: "group element",
                expected: self.k(),
                got: g.len(),
            });
        }
        Ok(())
    }

    fn check_base(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n() {
            return Err(Error::Dimension {
                what: "base point",
                expected: self.n(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// `Φ(g, q) = q + G g`.
    pub fn act(&self, g: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        self.check_group(g)?;
        self.check_base(q)?;
        let shift = &self.generators * DVector::from_column_slice(g);
        Ok(q.iter().zip(shift.iter()).map(|(a, b)| a + b).collect())
    }

    /// Infinitesimal generator `ξ_Q(q) = G ξ` (constant in `q`).
    pub fn infinitesimal_generator(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.act(xi, &vec![0.0; self.n()])
    }
}

/// `(q, p) ↦ (q + G g, p)`.
pub fn cotangent_lift(a: &TranslationAction, g: &[f64], z: &PhasePoint) -> Result<PhasePoint> {
    if z.p.len() != a.n() {
        return Err(Error::Dimension {
            what: "phase point momenta",
            expected: a.n(),
            got: z.p.len(),
        });
    }
    Ok(PhasePoint {
        q: a.act(g, &z.q)?,
        p: z.p.clone(),
        t: z.t,
    })
}

/// `J(q, p) = Gᵀ p`, i.e. `J(α_q)(ξ) = α_q(ξ_Q(q))`.
pub fn momentum_map(a: &TranslationAction, z: &PhasePoint) -> Result<MomentumValue> {
    covector_momentum(a, &z.p)
}

/// `Gᵀ p` for a bare covector.
pub fn covector_momentum(a: &TranslationAction, p: &[f64]) -> Result<MomentumValue> {
    if p.len() != a.n() {
        return Err(Error::Dimension {
            what: "covector",
            expected: a.n(),
            got: p.len(),
        });
    }
    let mu = a.generators.transpose() * DVector::from_column_slice(p);
    Ok(MomentumValue(mu.iter().copied().collect()))
}

/// Randomized invariance test of a phase-space function under the lifted
/// action.
///
/// Samples `z` uniformly in `[-3, 3]^{2n}` and `g` in `[-2, 2]^k`, and
/// requires `|f(lift(g, z)) − f(z)| ≤ tol (1 + |f(z)|)` for every pair.
/// Samples where `f` is singular are skipped.
pub fn is_invariant(
    a: &TranslationAction,
    coords: &Coordinates,
    f: &Expr,
    samples: usize,
    tol: f64,
    rng: &mut SampleRng,
) -> Result<bool> {
    Ok(invariance_violation(a, coords, f, samples, tol, rng)?.is_none())
}

/// Like [`is_invariant`] but returns the first violating sample as
/// `(residual, z)`.
pub fn invariance_violation(
    a: &TranslationAction,
    coords: &Coordinates,
    f: &Expr,
    samples: usize,
    tol: f64,
    rng: &mut SampleRng,
) -> Result<Option<(f64, PhasePoint)>> {
    if samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    if coords.n() != a.n() {
        return Err(Error::Dimension {
            what: "coordinates vs action",
            expected: a.n(),
            got: coords.n(),
        });
    }
    if a.k() == 0 {
        return Ok(None);
    }
    let n = a.n();
    let uses_time = f.depends_on(coords.time_name());
    let mut evaluated = 0;
    for _ in 0..samples {
        let mut z = PhasePoint::new(
            grid::uniform_point(rng, n, -3.0, 3.0),
            grid::uniform_point(rng, n, -3.0, 3.0),
        );
        if uses_time {
            z.t = Some(rng.gen_range(-3.0..=3.0));
        }
        let g = grid::uniform_point(rng, a.k(), -2.0, 2.0);
        let moved = cotangent_lift(a, &g, &z)?;
        // Samples landing on a singular set say nothing about invariance.
        let (f0, f1) = match (f.eval(&coords.bind(&z)), f.eval(&coords.bind(&moved))) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(ExprError::Domain { .. }), _) | (_, Err(ExprError::Domain { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        evaluated += 1;
        let r = (f1 - f0).abs();
        if r > tol * (1.0 + f0.abs()) {
            return Ok(Some((r, z)));
        }
    }
    if evaluated == 0 {
        return Err(Error::Singular(
            "every invariance sample hit a singular point".into(),
        ));
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// Largest `max − min` of a component of `J ∘ γ` over the grid.
    pub j_spread: f64,
    /// Whether `γ(q + G g) = γ(q)` held on every sampled pair.
    pub invariant: bool,
    /// `(j_spread ≤ tol) ⇔ invariant`.
    pub consistent: bool,
}

/// Number of group elements sampled per grid point by
/// [`check_invariance_lemma`].
const LEMMA_GROUP_SAMPLES: usize = 4;

/// Checks both sides of "`J ∘ γ` is constant iff `Im γ` is invariant" for a
/// closed 1-form on the given base-point grid.
pub fn check_invariance_lemma(
    a: &TranslationAction,
    gamma: &OneForm,
    grid_points: &[Vec<f64>],
    tol: f64,
) -> Result<InvarianceReport> {
    if gamma.dim() != a.n() {
        return Err(Error::Dimension {
            what: "one-form vs action",
            expected: a.n(),
            got: gamma.dim(),
        });
    }
    let k = a.k();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    let mut invariant = true;
    let mut rng = grid::rng(grid::DEFAULT_SEED);
    let mut b = Bindings::new();
    for q in grid_points {
        b.assign(gamma.vars(), q);
        let g0 = gamma.eval_with(&b)?;
        let mu = covector_momentum(a, &g0)?;
        for (i, m) in mu.0.iter().enumerate() {
            lo[i] = lo[i].min(*m);
            hi[i] = hi[i].max(*m);
        }
        if invariant && k > 0 {
            for _ in 0..LEMMA_GROUP_SAMPLES {
                let g = grid::uniform_point(&mut rng, k, -2.0, 2.0);
                let moved = gamma.eval(&a.act(&g, q)?)?;
                let scale = 1.0 + g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let dev = moved
                    .iter()
                    .zip(&g0)
                    .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                if dev > tol * scale {
                    invariant = false;
                    break;
                }
            }
        }
    }
    let j_spread = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| if h >= l { h - l } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(InvarianceReport {
        j_spread,
        invariant,
        consistent: (j_spread <= tol) == invariant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn calogero_action() -> TranslationAction {
        TranslationAction::new(2, &[vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn lift_identity_and_translation() {
        let a = calogero_action();
        let z = PhasePoint::new(vec![0.0, 1.0], vec![3.0, 4.0]);
        assert_eq!(cotangent_lift(&a, &[0.0], &z).unwrap(), z);
        let moved = cotangent_lift(&a, &[2.0], &z).unwrap();
        assert_eq!(moved, PhasePoint::new(vec![2.0, 3.0], vec![3.0, 4.0]));
    }

    #[test]
    fn momentum_examples() {
        let a = calogero_action();
        let z = PhasePoint::new(vec![0.3, -1.0], vec![3.0, -1.0]);
        assert_eq!(momentum_map(&a, &z).unwrap(), MomentumValue(vec![2.0]));
        let z0 = PhasePoint::new(vec![0.3, -1.0], vec![0.0, 0.0]);
        assert_eq!(momentum_map(&a, &z0).unwrap(), MomentumValue(vec![0.0]));
        // Time translation on (t, q): J(t, e, α_q) = e.
        let time = TranslationAction::new(2, &[vec![1.0, 0.0]]).unwrap();
        let z = PhasePoint::new(vec![5.0, 1.0], vec![-0.7, 2.0]);
        assert_eq!(momentum_map(&time, &z).unwrap().0, vec![-0.7]);
    }

    #[test]
    fn rank_and_dimension_errors() {
        assert!(matches!(
            TranslationAction::new(2, &[vec![1.0, 1.0], vec![2.0, 2.0]]),
            Err(Error::RankDeficient {
                rank: 1,
                expected: 2
            })
        ));
        assert!(matches!(
            TranslationAction::new(2, &[vec![1.0]]),
            Err(Error::Dimension { .. })
        ));
        let a = calogero_action();
        let z = PhasePoint::new(vec![0.0], vec![1.0]);
        assert!(cotangent_lift(&a, &[1.0], &z).is_err());
        assert!(momentum_map(&a, &z).is_err());
    }

    #[test]
    fn calogero_hamiltonian_is_invariant() {
        let coords = Coordinates::canonical(2);
        let h = parse("0.5*(p1^2+p2^2)+1/(q1-q2)^2").unwrap();
        let mut rng = grid::rng(42);
        assert!(is_invariant(&calogero_action(), &coords, &h, 200, 1e-9, &mut rng).unwrap());
        let bad = parse("q1^2").unwrap();
        assert!(!is_invariant(&calogero_action(), &coords, &bad, 200, 1e-9, &mut rng).unwrap());
        let trivial = TranslationAction::trivial(2);
        assert!(is_invariant(&trivial, &coords, &bad, 10, 1e-9, &mut rng).unwrap());
    }

    #[test]
    fn lemma_examples() {
        let a = calogero_action();
        let vars = vec!["q1".to_string(), "q2".to_string()];
        let pts = grid::tensor(&[(-2.0, 2.0), (-2.0, 2.0)], 7);

        let g = OneForm::exact(vars.clone(), parse("q1+q2").unwrap());
        let r = check_invariance_lemma(&a, &g, &pts, 1e-9).unwrap();
        assert_eq!(r.j_spread, 0.0);
        assert!(r.invariant && r.consistent);

        let g = OneForm::exact(vars.clone(), parse("q1^2").unwrap());
        let r = check_invariance_lemma(&a, &g, &pts, 1e-9).unwrap();
        assert!((r.j_spread - 8.0).abs() < 1e-12);
        assert!(!r.invariant && r.consistent);

        let r = check_invariance_lemma(&a, &OneForm::zero(vars), &pts, 1e-9).unwrap();
        assert_eq!(r.j_spread, 0.0);
        assert!(r.invariant && r.consistent);
    }
}
