use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;

use super::branch::{Branch, BranchIntegral, BranchSign, DEFAULT_PANELS};
use super::complete::{check_complete, CompletenessReport, GeneratingFunction, Kind};
use super::quadrature::{solve_reduced_1d, ReducedSolution};
use crate::error::{witness, Error, Result};
use crate::expr::{self, BinOp, Bindings, Expr};
use crate::grid;
use crate::phase_space::{Coordinates, HamiltonianSystem};
use crate::symmetry::{self, MomentumValue, TranslationAction};

/// `W = Σ q^l β_l + V(remaining q, β)` for cyclic coordinates `q^l`, and the
/// equation `h(q, β_l, ∂V/∂q_rest) = F` left for `V`.
#[derive(Debug, Clone)]
pub struct CyclicAnsatz {
    pub cyclic: Vec<String>,
    pub betas: Vec<String>,
    pub remaining_q: Vec<String>,
    /// Momenta standing for `∂V/∂q` in [`CyclicAnsatz::equation`].
    pub remaining_p: Vec<String>,
    /// `Σ q^l β_l`.
    pub linear_part: Expr,
    /// `h` with the cyclic momenta replaced by the `β`s.
    pub equation: Expr,
}

impl CyclicAnsatz {
    /// `W` with `V` written as a call, e.g. `phi*beta2 + V(theta, beta2)`.
    pub fn template(&self) -> String {
        let args: Vec<&str> = self
            .remaining_q
            .iter()
            .chain(&self.betas)
            .map(String::as_str)
            .collect();
        let v = format!("V({})", args.join(", "));
        if self.linear_part.is_zero() {
            v
        } else {
            format!("{} + {v}", self.linear_part)
        }
    }

    /// The equation with `∂V/∂q` spelled `V_q`.
    pub fn display_equation(&self) -> String {
        let map: HashMap<String, Expr> = self
            .remaining_p
            .iter()
            .zip(&self.remaining_q)
            .map(|(p, q)| (p.clone(), Expr::var(format!("V_{q}"))))
            .collect();
        self.equation.substitute(&map).to_string()
    }
}

/// Sets up the cyclic-variable ansatz. Each listed coordinate is checked to
/// be absent from `h` by sampling translations along it.
pub fn cyclic_ansatz(
    sys: &HamiltonianSystem,
    cyclic: &[usize],
    betas: &[String],
) -> Result<CyclicAnsatz> {
    let coords = sys.coords();
    let n = coords.n();
    if cyclic.len() != betas.len() {
        return Err(Error::Dimension {
            what: "cyclic constants",
            expected: cyclic.len(),
            got: betas.len(),
        });
    }
    let mut rng = grid::rng(grid::DEFAULT_SEED);
    for &l in cyclic {
        let name = coords
            .q
            .get(l)
            .ok_or_else(|| Error::Invalid(format!("coordinate index {l} out of range")))?;
        let axis = TranslationAction::coordinate_axes(n, &[l])?;
        if !symmetry::is_invariant(&axis, coords, sys.hamiltonian(), 100, 1e-9, &mut rng)? {
            return Err(Error::NotCyclic(name.clone()));
        }
    }
    let map: HashMap<String, Expr> = cyclic
        .iter()
        .zip(betas)
        .map(|(&l, b)| (coords.p[l].clone(), Expr::var(b.clone())))
        .collect();
    let equation = sys.hamiltonian().substitute(&map).simplify();
    let linear_part = expr::sum(
        cyclic
            .iter()
            .zip(betas)
            .map(|(&l, b)| Expr::var(coords.q[l].clone()) * Expr::var(b.clone())),
    );
    let rest: Vec<usize> = (0..n).filter(|i| !cyclic.contains(i)).collect();
    Ok(CyclicAnsatz {
        cyclic: cyclic.iter().map(|&l| coords.q[l].clone()).collect(),
        betas: betas.to_vec(),
        remaining_q: rest.iter().map(|&i| coords.q[i].clone()).collect(),
        remaining_p: rest.iter().map(|&i| coords.p[i].clone()).collect(),
        linear_part,
        equation,
    })
}

/// Symmetric heavy top with moments of inertia `I = I₁ = I₂` and `J = I₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct HeavyTop {
    pub i: f64,
    pub j: f64,
    pub m: f64,
    pub g: f64,
    pub l: f64,
}

impl HeavyTop {
    pub fn mgl(&self) -> f64 {
        self.m * self.g * self.l
    }
}

/// `h = ½(p_θ²/I + (p_φ − p_ψ cos θ)²/(I sin²θ) + p_ψ²/J) + mgl cos θ` on
/// coordinates `(theta, phi, psi)`.
pub fn heavy_top_hamiltonian(top: &HeavyTop) -> Result<HamiltonianSystem> {
    let text = format!(
        "0.5*(p_theta^2/{i:?} + (p_phi - p_psi*cos(theta))^2/({i:?}*sin(theta)^2) + p_psi^2/{j:?}) + {mgl:?}*cos(theta)",
        i = top.i,
        j = top.j,
        mgl = top.mgl()
    );
    let coords = Coordinates::new(["theta", "phi", "psi"], ["p_theta", "p_phi", "p_psi"])?;
    HamiltonianSystem::new(coords, expr::parse(&text)?)
}

#[derive(Debug, Clone)]
pub struct HeavyTopSolution {
    pub ansatz: CyclicAnsatz,
    /// `V(θ)` at the given constants, tabulated.
    pub v: ReducedSolution,
    /// `S = φβ₂ + ψβ₃ + V(θ, F, β₂, β₃) − tF`, type II in `(F, β₂, β₃)`.
    pub generating: GeneratingFunction,
    pub min_radicand: f64,
    /// `max |equation(θ, V′(θ)) − F|` over nodes and midpoints.
    pub equation_residual: f64,
    pub completeness: CompletenessReport,
}

fn radicand(top: &HeavyTop, b2: f64, b3: f64, f: f64, th: f64) -> f64 {
    let (s, c) = th.sin_cos();
    2.0 * top.i * (f - top.mgl() * c - b3 * b3 / (2.0 * top.j)) - (b2 - b3 * c).powi(2) / (s * s)
}

/// Separates the heavy top along its cyclic angles and integrates the
/// remaining `θ` equation by quadrature.
pub fn solve_heavy_top(
    top: &HeavyTop,
    beta2: f64,
    beta3: f64,
    energy: f64,
    theta_range: (f64, f64),
    n_nodes: usize,
) -> Result<HeavyTopSolution> {
    let (lo, hi) = theta_range;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Invalid(format!("bad theta range [{lo}, {hi}]")));
    }
    let k = (lo / PI).ceil();
    if k * PI <= hi {
        return Err(Error::Singular(format!(
            "sin(theta) vanishes at theta = {} inside the range",
            k * PI
        )));
    }
    let nodes = grid::linspace(lo, hi, n_nodes.max(2));
    let mut min_radicand = f64::INFINITY;
    for &th in &nodes {
        let r = radicand(top, beta2, beta3, energy, th);
        if r <= 0.0 {
            return Err(Error::TurningPoint {
                at: "theta".into(),
                value: th,
            });
        }
        min_radicand = min_radicand.min(r);
    }

    let sys = heavy_top_hamiltonian(top)?;
    let betas = vec!["beta2".to_string(), "beta3".to_string()];
    let ansatz = cyclic_ansatz(&sys, &[1, 2], &betas)?;
    let fixed = ansatz.equation.fix(&[("beta2", beta2), ("beta3", beta3)]);
    let v = solve_reduced_1d(
        &fixed,
        "theta",
        "p_theta",
        energy,
        theta_range,
        BranchSign::Positive,
        n_nodes,
    )?;

    let mut equation_residual = 0.0f64;
    for w in nodes.windows(2) {
        for th in [w[0], 0.5 * (w[0] + w[1]), w[1]] {
            let b = Bindings::new().with("theta", th).with("p_theta", v.dw(th)?);
            equation_residual = equation_residual.max((fixed.eval(&b)? - energy).abs());
        }
    }

    let params = vec!["F".to_string(), "beta2".to_string(), "beta3".to_string()];
    let residual = (ansatz.equation.clone() - Expr::var("F")).simplify();
    let branch = Branch::new(residual, "theta", "p_theta", &params, BranchSign::Positive)?;
    let vfun = Expr::apply(
        BranchIntegral::new(branch, Expr::var("p_theta"), lo, DEFAULT_PANELS, "V"),
        ["theta", "F", "beta2", "beta3"]
            .iter()
            .map(|s| Expr::var(*s))
            .collect(),
    );
    let s = ansatz.linear_part.clone() + vfun - Expr::var("t") * Expr::var("F");
    let generating = GeneratingFunction::new(Kind::TypeII, s, sys.coords().q.clone(), params, "t")?;
    let check_grid: Vec<Vec<f64>> = grid::linspace(lo, hi, 41)
        .into_iter()
        .map(|th| vec![0.5, th, 0.4, -1.1, energy, beta2, beta3])
        .collect();
    let completeness = check_complete(&generating, &sys, &check_grid)?;
    Ok(HeavyTopSolution {
        ansatz,
        v,
        generating,
        min_radicand,
        equation_residual,
        completeness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub s_m: Expr,
    pub s_g: Expr,
    pub c: f64,
    pub c_residual: f64,
}

/// Top-level constant of a simplified sum.
fn split_constant(e: &Expr) -> (Option<Expr>, f64) {
    match e {
        Expr::Const(c) => (None, *c),
        Expr::Binary(op @ (BinOp::Add | BinOp::Sub), l, r) => {
            let (le, lc) = split_constant(l);
            let (re, rc) = split_constant(r);
            let sign = if *op == BinOp::Add { 1.0 } else { -1.0 };
            let rest = match (le, re) {
                (None, None) => None,
                (Some(a), None) => Some(a),
                (None, Some(b)) if sign > 0.0 => Some(b),
                (None, Some(b)) => Some(-b),
                (Some(a), Some(b)) if sign > 0.0 => Some(a + b),
                (Some(a), Some(b)) => Some(a - b),
            };
            (rest, lc + sign * rc)
        }
        other => (Some(other.clone()), 0.0),
    }
}

/// Splits `S` on `M × G` into `S_M + S_G + c` with `S_G = Σ μ_a x^a`.
///
/// Requires `∂S/∂x^a = μ_a` on every grid point (points list the `m_vars`
/// values followed by the `g_vars` values).
pub fn additive_split_check(
    s: &Expr,
    m_vars: &[String],
    g_vars: &[String],
    mu: &MomentumValue,
    grid_points: &[Vec<f64>],
    tol: f64,
) -> Result<SplitReport> {
    if mu.k() != g_vars.len() {
        return Err(Error::Dimension {
            what: "momentum value",
            expected: g_vars.len(),
            got: mu.k(),
        });
    }
    let names: Vec<String> = m_vars.iter().chain(g_vars).cloned().collect();
    let ds = s.gradient(g_vars);
    for pt in grid_points {
        if pt.len() != names.len() {
            return Err(Error::Dimension {
                what: "split grid point",
                expected: names.len(),
                got: pt.len(),
            });
        }
        let mut b = Bindings::new();
        b.assign(&names, pt);
        for (d, m) in ds.iter().zip(&mu.0) {
            let r = (d.eval(&b)? - m).abs();
            if r > tol {
                return Err(Error::Precondition {
                    what: "J∘dS is not the momentum level".into(),
                    residual: r,
                    witness: witness(&names, pt),
                });
            }
        }
    }
    let s_g = expr::sum(
        g_vars
            .iter()
            .zip(&mu.0)
            .filter(|(_, m)| **m != 0.0)
            .map(|(x, m)| Expr::Const(*m) * Expr::var(x.clone())),
    )
    .simplify();
    let x0: Vec<(&str, f64)> = g_vars.iter().map(|x| (x.as_str(), 0.0)).collect();
    let (rest, c) = split_constant(&s.fix(&x0));
    let s_m = rest.unwrap_or_else(Expr::zero);
    let mut c_residual = 0.0f64;
    for pt in grid_points {
        let mut b = Bindings::new();
        b.assign(&names, pt);
        let r = s.eval(&b)? - s_m.eval(&b)? - s_g.eval(&b)? - c;
        c_residual = c_residual.max(r.abs());
    }
    Ok(SplitReport {
        s_m,
        s_g,
        c,
        c_residual,
    })
}
