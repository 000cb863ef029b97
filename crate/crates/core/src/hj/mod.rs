//! Hamilton-Jacobi problems: residual checks, 1-D quadrature solvers,
//! complete solutions and the time-extension and cyclic ansätze.
//!
//! A 1-form `γ` on `Q` solves the problem for `h` when `Im γ` is lagrangian
//! (`γ` closed) and `h` is constant on it. Time-dependent solutions follow
//! the convention `∂S/∂t + h(q, ∂S/∂q) = 0`, so a time-independent solution
//! `W` with energy `E` extends to `S = W − t E`.

pub mod branch;
mod complete;
mod cyclic;
mod quadrature;

pub use crate::forms::{OneForm, TwoForm};
pub use branch::{Branch, BranchIntegral, BranchSign, OnBranch, Table};
pub use complete::{
    check_complete, quadrature_complete_solution, time_extension, CompletenessReport,
    GeneratingFunction, Kind, TimeDependentSolution,
};
pub use cyclic::{
    additive_split_check, cyclic_ansatz, heavy_top_hamiltonian, solve_heavy_top, CyclicAnsatz,
    HeavyTop, HeavyTopSolution, SplitReport,
};
pub use quadrature::{
    solve_reduced_1d, ReducedSolution, SolveReport, DEFAULT_NODES, TURNING_MARGIN,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase_space::HamiltonianSystem;
use crate::reduction::located;

/// `max |∂_i γ_j − ∂_j γ_i|` over the grid.
pub fn closedness_residual(gamma: &OneForm, grid: &[Vec<f64>]) -> Result<f64> {
    let d = gamma.exterior_derivative();
    let mut worst = 0.0f64;
    for y in grid {
        let m = d.eval(y).map_err(|e| located(e, gamma.vars(), y))?;
        worst = m.iter().flatten().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HjResidual {
    /// Mean of `h∘γ` over the grid.
    pub e_est: f64,
    /// `max |h∘γ − e_est|`.
    pub max_dev: f64,
}

/// Values of `h(q, γ(q))` on the grid.
pub fn energy_on_graph(
    sys: &HamiltonianSystem,
    gamma: &OneForm,
    grid: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let coords = sys.coords();
    if sys.is_time_dependent() {
        return Err(Error::Invalid(
            "hj_residual needs a time-independent hamiltonian".into(),
        ));
    }
    if gamma.vars() != coords.q.as_slice() {
        return Err(Error::Invalid(
            "one-form is not written in the system's configuration coordinates".into(),
        ));
    }
    let mut out = Vec::with_capacity(grid.len());
    for q in grid {
        let at = |e: Error| located(e, &coords.q, q);
        let mut b = gamma.bind(q)?;
        let p = gamma.eval_with(&b).map_err(at)?;
        b.assign(&coords.p, &p);
        out.push(sys.hamiltonian().eval(&b).map_err(|e| at(e.into()))?);
    }
    Ok(out)
}

/// Checks that `h` is constant along `Im γ` on the grid.
pub fn hj_residual(
    sys: &HamiltonianSystem,
    gamma: &OneForm,
    grid: &[Vec<f64>],
) -> Result<HjResidual> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty grid".into()));
    }
    let values = energy_on_graph(sys, gamma, grid)?;
    let e_est = values.iter().sum::<f64>() / values.len() as f64;
    let max_dev = values.iter().fold(0.0f64, |m, v| m.max((v - e_est).abs()));
    Ok(HjResidual { e_est, max_dev })
}
