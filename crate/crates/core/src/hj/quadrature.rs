//! One-dimensional reduced Hamilton-Jacobi equations `h̃(y, W̄′) = E`.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::branch::{Branch, BranchSign, OnBranch, Table, TabulatedIntegral};
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};
use crate::forms::OneForm;
use crate::grid;

/// Default number of quadrature nodes.
pub const DEFAULT_NODES: usize = 2001;
/// Distance kept from the ends of the range when probing for turning points.
pub const TURNING_MARGIN: f64 = 1e-6;

/// Tabulated solution of a reduced 1-D problem.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub energy: f64,
    pub branch: BranchSign,
    /// `W̄′(y) dy` with potential `W̄`.
    pub form: OneForm,
    pub table: Arc<Table>,
    /// `max |h̃(y, W̄′(y)) − E|` over the nodes.
    pub node_residual: f64,
    branch_data: Arc<Branch>,
    h: Expr,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub energy: f64,
    pub range: (f64, f64),
    pub nodes: usize,
    pub node_residual: f64,
}

impl ReducedSolution {
    pub fn w(&self, y: f64) -> Result<f64> {
        let b = Bindings::new().with(self.form.vars()[0].clone(), y);
        Ok(self
            .form
            .potential()
            .expect("tabulated potential")
            .eval(&b)?)
    }

    pub fn dw(&self, y: f64) -> Result<f64> {
        Ok(self.form.eval(&[y])?[0])
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.h
    }

    pub fn branch(&self) -> &Arc<Branch> {
        &self.branch_data
    }

    pub fn report(&self) -> SolveReport {
        SolveReport {
            energy: self.energy,
            range: (
                self.table.y[0],
                *self.table.y.last().unwrap_or(&self.table.y[0]),
            ),
            nodes: self.table.y.len(),
            node_residual: self.node_residual,
        }
    }

    /// Writes `y,W,dW` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let y = &self.form.vars()[0];
        writeln!(out, "{y},W,dW")?;
        for i in 0..self.table.y.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.table.y[i], self.table.w[i], self.table.dw[i]
            )?;
        }
        Ok(())
    }
}

/// Solves `h̃(y, p) = E` for `p` on one branch and integrates `W̄ = ∫ p dy`.
///
/// Nodes are uniform on `range`; `W̄` is accumulated from the start of the
/// range by Simpson's rule on each node interval, with an extra root solve
/// at every midpoint. The returned form evaluates `W̄` by cubic Hermite
/// interpolation and `W̄′` by an exact root solve warm-started from the
/// table.
pub fn solve_reduced_1d(
    h: &Expr,
    y: &str,
    p: &str,
    energy: f64,
    range: (f64, f64),
    branch: BranchSign,
    n_nodes: usize,
) -> Result<ReducedSolution> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Invalid(format!("bad range [{lo}, {hi}]")));
    }
    if n_nodes < 2 {
        return Err(Error::Invalid("at least two nodes are required".into()));
    }
    let residual = (h.clone() - Expr::Const(energy)).simplify();
    let br = Branch::new(residual, y, p, &[], branch)?;
    // Turning points just outside the range would make the end slopes blow up.
    for probe in [lo - TURNING_MARGIN, hi + TURNING_MARGIN] {
        br.root(&[probe], None)?;
    }
    let nodes = grid::linspace(lo, hi, n_nodes);
    let mut dw = Vec::with_capacity(n_nodes);
    let mut w = Vec::with_capacity(n_nodes);
    let mut guess = None;
    let mut node_residual = 0.0f64;
    let hb =
        |yv: f64, pv: f64| -> Result<f64> { Ok(h.eval(&Bindings::new().with(y, yv).with(p, pv))?) };
    for (i, &yv) in nodes.iter().enumerate() {
        let pv = br.root(&[yv], guess)?;
        node_residual = node_residual.max((hb(yv, pv)? - energy).abs());
        if i == 0 {
            w.push(0.0);
        } else {
            let y0 = nodes[i - 1];
            let mid = br.root(&[0.5 * (y0 + yv)], Some(pv))?;
            let prev = dw[i - 1];
            w.push(w[i - 1] + (yv - y0) / 6.0 * (prev + 4.0 * mid + pv));
        }
        dw.push(pv);
        guess = Some(pv);
    }
    let table = Arc::new(Table { y: nodes, w, dw });
    let wbar = Arc::new(TabulatedIntegral::new(table.clone(), br.clone(), "W"));
    let dwbar = OnBranch::with_hint(br.clone(), Expr::var(p), "dW", table.clone());
    let yv = Expr::var(y);
    let form = OneForm::new(
        vec![y.to_string()],
        vec![Expr::apply(dwbar, vec![yv.clone()])],
    )?
    .with_potential(Some(Expr::apply(wbar, vec![yv])));
    Ok(ReducedSolution {
        energy,
        branch,
        form,
        table,
        node_residual,
        branch_data: br,
        h: h.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn calogero_reduced_solution() {
        let h = parse("p^2 + 1/q^2").unwrap();
        let s =
            solve_reduced_1d(&h, "q", "p", 2.0, (0.8, 5.0), BranchSign::Positive, 2001).unwrap();
        assert!(s.node_residual <= 1e-10);
        assert!((s.dw(2.0).unwrap() - 1.75f64.sqrt()).abs() < 1e-13);
        // u - atan(u) with u = sqrt(E q^2 - 1)
        let closed = |q: f64| {
            let u = (2.0 * q * q - 1.0f64).sqrt();
            u - u.atan()
        };
        let got = s.w(3.3).unwrap() - s.w(0.8).unwrap();
        assert!((got - (closed(3.3) - closed(0.8))).abs() < 1e-11);
    }

    #[test]
    fn free_particle_is_linear() {
        let h = parse("p^2/2").unwrap();
        let s = solve_reduced_1d(&h, "y", "p", 0.5, (-1.0, 2.0), BranchSign::Positive, 31).unwrap();
        assert_eq!(s.dw(0.3).unwrap(), 1.0);
        assert!((s.w(1.5).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn range_through_turning_point_fails() {
        let h = parse("p^2 + 1/q^2").unwrap();
        let r = solve_reduced_1d(&h, "q", "p", 2.0, (0.5, 5.0), BranchSign::Positive, 101);
        assert!(matches!(r, Err(Error::TurningPoint { .. })));
    }
}
