//! Quotient charts, reduced Hamiltonians and magnetic terms.
//!
//! For a translation action with generator matrix `G` the quotient
//! `Q/G` is charted linearly. The chart matrix `T` stacks a `y`-block whose
//! rows annihilate `G` (invariant coordinates) on top of the `x`-block
//! `(GᵀG)⁻¹Gᵀ` (group coordinates, `x ↦ x + g` under the action). Covectors
//! transform by `p = Tᵀ (p_y, p_x)` and the momentum map becomes `J = p_x`.
//! The connection is the flat one whose horizontal space is spanned by the
//! `y` directions.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{witness, Error, Result};
use crate::expr::{self, Bindings, Expr, ExprError};
use crate::forms::{OneForm, TwoForm};
use crate::grid::{self, SampleRng};
use crate::phase_space::{Coordinates, HamiltonianSystem, PhasePoint};
use crate::symmetry::{self, covector_momentum, MomentumValue, TranslationAction};

/// Default tolerance for sampled geometric preconditions.
pub const DEFAULT_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-12;
const PRECONDITION_SAMPLES: usize = 100;

#[derive(Debug, Clone)]
pub struct QuotientChart {
    action: TranslationAction,
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
    q_names: Vec<String>,
    y_names: Vec<String>,
    x_names: Vec<String>,
    py_names: Vec<String>,
}

/// Basis of `{v : Mv = 0}` read off the reduced row echelon form of `M`.
fn null_space_rref(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val < PIVOT_EPS {
            continue;
        }
        a.swap_rows(r, best);
        let piv = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        a[(i, j)] -= f * a[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[(row, free)];
        }
        if let Some(first) = v.iter().find(|x| x.abs() > PIVOT_EPS) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        for x in &mut v {
            if *x == 0.0 {
                *x = 0.0; // drop negative zeros
            }
        }
        basis.push(v);
    }
    basis
}

fn default_names(prefix: &str, m: usize) -> Vec<String> {
    if m == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=m).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// `Σ c_j v_j + c0`, skipping zero coefficients.
fn linear_expr(coeffs: &[f64], vars: &[String], offset: f64) -> Expr {
    let mut terms = Vec::new();
    for (c, v) in coeffs.iter().zip(vars) {
        if *c != 0.0 {
            terms.push(Expr::Const(*c) * Expr::var(v.clone()));
        }
    }
    if offset != 0.0 {
        terms.push(Expr::Const(offset));
    }
    expr::sum(terms).simplify()
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-14 {
        0.0
    } else {
        x
    }
}

/// Builds the chart with default reduced names (`y`, `py` or `y1..`, `py1..`).
pub fn build_chart(a: &TranslationAction, q_names: &[String]) -> Result<QuotientChart> {
    let m = a.n() - a.k();
    QuotientChart::new(a, q_names, &default_names("y", m), &default_names("py", m))
}

impl QuotientChart {
    pub fn new(
        a: &TranslationAction,
        q_names: &[String],
        y_names: &[String],
        py_names: &[String],
    ) -> Result<Self> {
        let (n, k) = (a.n(), a.k());
        let m = n - k;
        if q_names.len() != n {
            return Err(Error::Dimension {
                what: "configuration names",
                expected: n,
                got: q_names.len(),
            });
        }
        for (what, names) in [
            ("reduced coordinates", y_names),
            ("reduced momenta", py_names),
        ] {
            if names.len() != m {
                return Err(Error::Dimension {
                    what,
                    expected: m,
                    got: names.len(),
                });
            }
        }
        let mut seen: Vec<&String> = y_names.iter().chain(py_names).collect();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid(
                "reduced coordinate names must be distinct".into(),
            ));
        }
        let g = a.matrix();
        let mut t = DMatrix::zeros(n, n);
        for (i, row) in null_space_rref(&g.transpose()).iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[(i, j)] = *v;
            }
        }
        if k > 0 {
            let gtg = g.transpose() * g;
            let inv = gtg.try_inverse().ok_or(Error::RankDeficient {
                rank: 0,
                expected: k,
            })?;
            let xb = inv * g.transpose();
            for i in 0..k {
                for j in 0..n {
                    t[(m + i, j)] = clean(xb[(i, j)]);
                }
            }
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("chart matrix is not invertible".into()))?
            .map(clean);
        let taken: Vec<&String> = y_names.iter().chain(py_names).chain(q_names).collect();
        let x_names = (1..=k)
            .map(|i| {
                let mut name = if k == 1 {
                    "x".to_string()
                } else {
                    format!("x{i}")
                };
                while taken.contains(&&name) {
                    name.push('_');
                }
                name
            })
            .collect();
        Ok(QuotientChart {
            action: a.clone(),
            t,
            t_inv,
            q_names: q_names.to_vec(),
            y_names: y_names.to_vec(),
            x_names,
            py_names: py_names.to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.action.n()
    }

    pub fn k(&self) -> usize {
        self.action.k()
    }

    /// Dimension of `Q/G`.
    pub fn m(&self) -> usize {
        self.n() - self.k()
    }

    pub fn action(&self) -> &TranslationAction {
        &self.action
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.t_inv
    }

    pub fn y_block(&self) -> Vec<Vec<f64>> {
        self.rows(0..self.m())
    }

    pub fn x_block(&self) -> Vec<Vec<f64>> {
        self.rows(self.m()..self.n())
    }

    fn rows(&self, r: std::ops::Range<usize>) -> Vec<Vec<f64>> {
        r.map(|i| self.t.row(i).iter().copied().collect()).collect()
    }

    pub fn q_names(&self) -> &[String] {
        &self.q_names
    }

    pub fn y_names(&self) -> &[String] {
        &self.y_names
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn py_names(&self) -> &[String] {
        &self.py_names
    }

    /// Coordinates of `T*(Q/G)`.
    pub fn reduced_coordinates(&self) -> Result<Coordinates> {
        Coordinates::new(self.y_names.clone(), self.py_names.clone())
    }

    /// `(y, x) = T q`.
    pub fn split(&self, q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(q.len(), self.n(), "base point")?;
        let v = &self.t * DVector::from_column_slice(q);
        let m = self.m();
        Ok((
            v.rows(0, m).iter().copied().collect(),
            v.rows(m, self.k()).iter().copied().collect(),
        ))
    }

    /// `q = T⁻¹ (y, x)`.
    pub fn join(&self, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check(y.len(), self.m(), "reduced point")?;
        self.check(x.len(), self.k(), "group coordinates")?;
        let v: Vec<f64> = y.iter().chain(x).copied().collect();
        Ok((&self.t_inv * DVector::from_vec(v))
            .iter()
            .copied()
            .collect())
    }

    /// `p = Tᵀ (p_y, p_x)`.
    pub fn join_covector(&self, py: &[f64], px: &[f64]) -> Result<Vec<f64>> {
        self.check(py.len(), self.m(), "reduced covector")?;
        self.check(px.len(), self.k(), "momentum")?;
        let v: Vec<f64> = py.iter().chain(px).copied().collect();
        Ok((self.t.transpose() * DVector::from_vec(v))
            .iter()
            .copied()
            .collect())
    }

    /// `(p_y, p_x) = T⁻ᵀ p`.
    pub fn split_covector(&self, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(p.len(), self.n(), "covector")?;
        let v = self.t_inv.transpose() * DVector::from_column_slice(p);
        let m = self.m();
        Ok((
            v.rows(0, m).iter().copied().collect(),
            v.rows(m, self.k()).iter().copied().collect(),
        ))
    }

    fn check(&self, got: usize, expected: usize, what: &'static str) -> Result<()> {
        if got != expected {
            return Err(Error::Dimension {
                what,
                expected,
                got,
            });
        }
        Ok(())
    }

    /// `q_i` as linear expressions in the chart variables `(y, x)`.
    pub fn q_in_chart(&self) -> HashMap<String, Expr> {
        let vars: Vec<String> = self.y_names.iter().chain(&self.x_names).cloned().collect();
        self.q_names
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let row: Vec<f64> = self.t_inv.row(i).iter().copied().collect();
                (q.clone(), linear_expr(&row, &vars, 0.0))
            })
            .collect()
    }

    /// `y_i` as linear expressions in `q`.
    pub fn y_in_q(&self) -> HashMap<String, Expr> {
        self.y_names
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let row: Vec<f64> = self.t.row(i).iter().copied().collect();
                (y.clone(), linear_expr(&row, &self.q_names, 0.0))
            })
            .collect()
    }

    /// `x_a` as linear expressions in `q`.
    pub fn x_in_q(&self) -> Vec<Expr> {
        (0..self.k())
            .map(|a| {
                let row: Vec<f64> = self.t.row(self.m() + a).iter().copied().collect();
                linear_expr(&row, &self.q_names, 0.0)
            })
            .collect()
    }

    /// The flat connection form `α_μ = Σ μ_a dx^a` written on `Q`.
    pub fn flat_alpha(&self, mu: &MomentumValue) -> Result<OneForm> {
        self.check(mu.k(), self.k(), "momentum value")?;
        let components = (0..self.n())
            .map(|i| {
                let c: f64 = (0..self.k())
                    .map(|a| self.t[(self.m() + a, i)] * mu.0[a])
                    .sum();
                Expr::Const(clean(c))
            })
            .collect();
        let potential = expr::sum(
            self.x_in_q()
                .into_iter()
                .zip(&mu.0)
                .filter(|(_, m)| **m != 0.0)
                .map(|(x, m)| Expr::Const(*m) * x),
        )
        .simplify();
        Ok(OneForm::new(self.q_names.clone(), components)?.with_potential(Some(potential)))
    }

    /// Components of a 1-form on `Q` in chart coordinates, as functions of
    /// `(y, x)`: first the `m` horizontal components, then the `k` group ones.
    pub fn form_in_chart(&self, gamma: &OneForm) -> Result<Vec<Expr>> {
        if gamma.vars() != self.q_names.as_slice() {
            return Err(Error::Invalid(
                "one-form is not written in the chart's configuration coordinates".into(),
            ));
        }
        let subs = gamma.substitute(&self.q_in_chart());
        Ok((0..self.n())
            .map(|r| {
                let terms = (0..self.n())
                    .filter(|&i| self.t_inv[(i, r)] != 0.0)
                    .map(|i| Expr::Const(self.t_inv[(i, r)]) * subs[i].clone());
                expr::sum(terms).simplify()
            })
            .collect())
    }
}

/// Everything needed to work on `T*(Q/G)` at one momentum level.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub chart: QuotientChart,
    pub mu: MomentumValue,
    pub system: HamiltonianSystem,
    pub beta: TwoForm,
}

impl ReducedSystem {
    pub fn hamiltonian(&self) -> &Expr {
        self.system.hamiltonian()
    }
}

/// `h̃_μ(y, p_y) = h(T⁻¹(y, 0), Tᵀ(p_y, μ))`.
///
/// Checks invariance of `h` first (200 samples at [`DEFAULT_TOL`]) and
/// verifies afterwards that the substituted expression does not depend on
/// the group coordinates.
pub fn reduced_hamiltonian(
    sys: &HamiltonianSystem,
    chart: &QuotientChart,
    mu: &MomentumValue,
    rng: &mut SampleRng,
) -> Result<Expr> {
    let coords = sys.coords();
    if coords.q != chart.q_names {
        return Err(Error::Invalid(
            "chart and system use different configuration names".into(),
        ));
    }
    chart.check(mu.k(), chart.k(), "momentum value")?;
    if let Some((r, z)) = symmetry::invariance_violation(
        &chart.action,
        coords,
        sys.hamiltonian(),
        200,
        DEFAULT_TOL,
        rng,
    )? {
        let names: Vec<String> = coords.q.iter().chain(&coords.p).cloned().collect();
        return Err(Error::Precondition {
            what: "hamiltonian is not invariant under the action".into(),
            residual: r,
            witness: witness(&names, &z.to_vec()),
        });
    }
    let mut map = chart.q_in_chart();
    for (i, p) in coords.p.iter().enumerate() {
        let coeffs: Vec<f64> = (0..chart.m()).map(|j| chart.t[(j, i)]).collect();
        let offset: f64 = (0..chart.k())
            .map(|a| chart.t[(chart.m() + a, i)] * mu.0[a])
            .sum();
        map.insert(
            p.clone(),
            linear_expr(&coeffs, &chart.py_names, clean(offset)),
        );
    }
    let full = sys.hamiltonian().substitute(&map).simplify();
    let x0: Vec<(&str, f64)> = chart.x_names.iter().map(|x| (x.as_str(), 0.0)).collect();
    let reduced = full.fix(&x0);
    if chart.x_names.iter().any(|x| full.depends_on(x)) {
        check_x_free(&full, &reduced, chart, coords.time_name(), rng)?;
    }
    Ok(reduced)
}

fn check_x_free(
    full: &Expr,
    reduced: &Expr,
    chart: &QuotientChart,
    time: &str,
    rng: &mut SampleRng,
) -> Result<()> {
    let m = chart.m();
    let mut evaluated = 0;
    for _ in 0..PRECONDITION_SAMPLES {
        let y = grid::uniform_point(rng, m, -3.0, 3.0);
        let py = grid::uniform_point(rng, m, -3.0, 3.0);
        let x = grid::uniform_point(rng, chart.k(), -2.0, 2.0);
        let mut b = Bindings::new();
        b.assign(&chart.y_names, &y);
        b.assign(&chart.py_names, &py);
        b.set(time, grid::uniform_point(rng, 1, -1.0, 1.0)[0]);
        let r0 = match reduced.eval(&b) {
            Ok(v) => v,
            Err(ExprError::Domain { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        b.assign(&chart.x_names, &x);
        let r1 = match full.eval(&b) {
            Ok(v) => v,
            Err(ExprError::Domain { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        evaluated += 1;
        if (r1 - r0).abs() > DEFAULT_TOL * (1.0 + r0.abs()) {
            let names: Vec<String> = chart
                .y_names
                .iter()
                .chain(&chart.x_names)
                .cloned()
                .collect();
            let vals: Vec<f64> = y.iter().chain(&x).copied().collect();
            return Err(Error::Precondition {
                what: "reduced hamiltonian depends on the group coordinates".into(),
                residual: (r1 - r0).abs(),
                witness: witness(&names, &vals),
            });
        }
    }
    if evaluated == 0 {
        return Err(Error::Singular(
            "x-independence samples all singular".into(),
        ));
    }
    Ok(())
}

/// Reduces `sys` at level `μ` with the flat connection.
pub fn reduce(
    sys: &HamiltonianSystem,
    chart: &QuotientChart,
    mu: &MomentumValue,
    rng: &mut SampleRng,
) -> Result<ReducedSystem> {
    let h = reduced_hamiltonian(sys, chart, mu, rng)?;
    let coords = chart.reduced_coordinates()?;
    let coords = match &sys.coords().t {
        Some(t) => coords.with_time(t.clone()),
        None => coords,
    };
    Ok(ReducedSystem {
        chart: chart.clone(),
        mu: mu.clone(),
        system: HamiltonianSystem::new(coords, h)?,
        beta: TwoForm::zero(chart.y_names.clone()),
    })
}

/// Samples base points `q` in `[-3, 3]^n`, skipping points where `f` fails
/// with a domain error, and returns the first one for which `bad` reports a
/// residual above `tol`.
fn sample_base<F>(
    chart: &QuotientChart,
    rng: &mut SampleRng,
    tol: f64,
    mut residual: F,
) -> Result<Option<(f64, Vec<f64>)>>
where
    F: FnMut(&[f64], &mut SampleRng) -> Result<f64>,
{
    for _ in 0..PRECONDITION_SAMPLES {
        let q = grid::uniform_point(rng, chart.n(), -3.0, 3.0);
        match residual(&q, rng) {
            Ok(r) if r > tol => return Ok(Some((r, q))),
            Ok(_) => {}
            Err(Error::Expr(ExprError::Domain { .. })) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Sampled check that a 1-form on `Q` is invariant and has `J∘γ ≡ μ`.
/// Errors carry the first violating point.
pub fn check_level_form(
    chart: &QuotientChart,
    gamma: &OneForm,
    mu: &MomentumValue,
    tol: f64,
    rng: &mut SampleRng,
    label: &str,
) -> Result<()> {
    chart.check(gamma.dim(), chart.n(), "one-form")?;
    chart.check(mu.k(), chart.k(), "momentum value")?;
    let a = &chart.action;
    let inv = sample_base(chart, rng, tol, |q, rng| {
        let g = grid::uniform_point(rng, a.k(), -2.0, 2.0);
        let v0 = gamma.eval(q)?;
        let v1 = gamma.eval(&a.act(&g, q)?)?;
        Ok(sup_diff(&v0, &v1) / (1.0 + v0.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
    })?;
    if let Some((r, q)) = inv {
        return Err(Error::Precondition {
            what: format!("{label} is not G-invariant"),
            residual: r,
            witness: witness(&chart.q_names, &q),
        });
    }
    let lvl = sample_base(chart, rng, tol, |q, _| {
        Ok(sup_diff(&covector_momentum(a, &gamma.eval(q)?)?.0, &mu.0))
    })?;
    if let Some((r, q)) = lvl {
        return Err(Error::Precondition {
            what: format!("J∘{label} is not the momentum level"),
            residual: r,
            witness: witness(&chart.q_names, &q),
        });
    }
    Ok(())
}

/// `β_μ` with `π*β_μ = dα_μ`: the exterior derivative of the horizontal part
/// of `α_μ` in chart coordinates.
pub fn magnetic_term(
    chart: &QuotientChart,
    alpha: &OneForm,
    mu: &MomentumValue,
    tol: f64,
    rng: &mut SampleRng,
) -> Result<TwoForm> {
    check_level_form(chart, alpha, mu, tol, rng, "α_μ")?;
    Ok(horizontal_part(chart, alpha)?.exterior_derivative())
}

/// Horizontal components of an invariant 1-form on `Q`, as a 1-form on
/// `Q/G` (evaluated at `x = 0`).
fn horizontal_part(chart: &QuotientChart, gamma: &OneForm) -> Result<OneForm> {
    let comps = chart.form_in_chart(gamma)?;
    let x0: Vec<(&str, f64)> = chart.x_names.iter().map(|x| (x.as_str(), 0.0)).collect();
    let horizontal = comps[..chart.m()].iter().map(|c| c.fix(&x0)).collect();
    OneForm::new(chart.y_names.clone(), horizontal)
}

/// `α_q ↦ α_q − α_μ(q)`.
pub fn momentum_shift(z: &PhasePoint, alpha: &OneForm) -> Result<PhasePoint> {
    let a = alpha.eval(&z.q)?;
    if a.len() != z.p.len() {
        return Err(Error::Dimension {
            what: "shift form",
            expected: z.p.len(),
            got: a.len(),
        });
    }
    Ok(PhasePoint {
        q: z.q.clone(),
        p: z.p.iter().zip(&a).map(|(p, a)| p - a).collect(),
        t: z.t,
    })
}

/// `max |dγ̃ + β|` over the grid; zero when `Im γ̃` is lagrangian for the
/// magnetic structure `ω + β`.
pub fn magnetic_condition_residual(
    gamma: &OneForm,
    beta: &TwoForm,
    grid_points: &[Vec<f64>],
) -> Result<f64> {
    if gamma.vars() != beta.vars() {
        return Err(Error::Invalid(
            "form and magnetic term live on different charts".into(),
        ));
    }
    let d = gamma.exterior_derivative();
    let mut worst = 0.0f64;
    for y in grid_points {
        let dg = d.eval(y).map_err(|e| located(e, gamma.vars(), y))?;
        let b = beta.eval(y).map_err(|e| located(e, gamma.vars(), y))?;
        for (r1, r2) in dg.iter().zip(&b) {
            for (u, v) in r1.iter().zip(r2) {
                worst = worst.max((u + v).abs());
            }
        }
    }
    Ok(worst)
}

pub(crate) fn located(e: Error, names: &[String], at: &[f64]) -> Error {
    match e {
        Error::Expr(inner) => Error::at(inner, names, at),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionReport {
    /// `max |dγ̃ + β_μ|` on the grid.
    pub magnetic_residual: f64,
}

/// Pushes an invariant lagrangian graph in `J⁻¹(μ)` down to `T*(Q/G)`.
///
/// `alpha` is the connection form `α_μ` used for the shift (the flat one
/// when `None`). Preconditions (closedness, invariance and the momentum
/// level) are sampled at `tol`; the returned report checks the magnetic
/// lagrangian condition on `grid_points` (points of `Q/G`).
pub fn project_lagrangian(
    gamma: &OneForm,
    chart: &QuotientChart,
    mu: &MomentumValue,
    alpha: Option<&OneForm>,
    grid_points: &[Vec<f64>],
    tol: f64,
    rng: &mut SampleRng,
) -> Result<(OneForm, ProjectionReport)> {
    let flat;
    let alpha = match alpha {
        Some(a) => a,
        None => {
            flat = chart.flat_alpha(mu)?;
            &flat
        }
    };
    let d = gamma.exterior_derivative();
    let closed = sample_base(chart, rng, tol, |q, _| {
        Ok(d.eval(q)?
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    })?;
    if let Some((r, q)) = closed {
        return Err(Error::Precondition {
            what: "γ is not closed".into(),
            residual: r,
            witness: witness(&chart.q_names, &q),
        });
    }
    check_level_form(chart, gamma, mu, tol, rng, "γ")?;
    let shifted = OneForm::new(
        gamma.vars().to_vec(),
        gamma
            .components()
            .iter()
            .zip(alpha.components())
            .map(|(g, a)| (g.clone() - a.clone()).simplify())
            .collect(),
    )?;
    let reduced = horizontal_part(chart, &shifted)?;
    let beta = horizontal_part(chart, alpha)?.exterior_derivative();
    let magnetic_residual = magnetic_condition_residual(&reduced, &beta, grid_points)?;
    Ok((reduced, ProjectionReport { magnetic_residual }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn calogero_chart() -> QuotientChart {
        let a = TranslationAction::new(2, &[vec![1.0, 1.0]]).unwrap();
        QuotientChart::new(&a, &names(&["q1", "q2"]), &names(&["q"]), &names(&["p"])).unwrap()
    }

    #[test]
    fn calogero_chart_blocks() {
        let c = calogero_chart();
        assert_eq!(c.y_block(), vec![vec![1.0, -1.0]]);
        assert_eq!(c.x_block(), vec![vec![0.5, 0.5]]);
        let q = c.join(&[2.0], &[0.0]).unwrap();
        assert_eq!(q, vec![1.0, -1.0]);
        let (y, x) = c.split(&[3.0, 0.0]).unwrap();
        assert_eq!((y, x), (vec![3.0], vec![1.5]));
        let p = c.join_covector(&[1.0], &[2.0]).unwrap();
        assert_eq!(p, vec![2.0, 0.0]);
    }

    #[test]
    fn trivial_and_time_charts() {
        let id = build_chart(&TranslationAction::trivial(2), &names(&["a", "b"])).unwrap();
        assert_eq!(id.matrix(), &DMatrix::identity(2, 2));
        let time = TranslationAction::new(2, &[vec![1.0, 0.0]]).unwrap();
        let c = build_chart(&time, &names(&["t", "q"])).unwrap();
        assert_eq!(c.y_block(), vec![vec![0.0, 1.0]]);
        assert_eq!(c.x_block(), vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn calogero_reduced_hamiltonian_prints() {
        let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)+1/(q1-q2)^2").unwrap();
        let mut rng = grid::rng(42);
        let h = reduced_hamiltonian(&sys, &calogero_chart(), &MomentumValue(vec![0.0]), &mut rng)
            .unwrap();
        assert_eq!(h.to_string(), "p^2 + 1/q^2");
    }

    #[test]
    fn free_particle_at_level_m() {
        let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)").unwrap();
        let a = TranslationAction::new(2, &[vec![1.0, 0.0]]).unwrap();
        let c = build_chart(&a, &names(&["q1", "q2"])).unwrap();
        let mut rng = grid::rng(1);
        let h = reduced_hamiltonian(&sys, &c, &MomentumValue(vec![3.0]), &mut rng).unwrap();
        let b = Bindings::new().with("y", 0.4).with("py", 2.0);
        assert!((h.eval(&b).unwrap() - (2.0 + 4.5)).abs() < 1e-15);
    }

    #[test]
    fn non_invariant_hamiltonian_rejected() {
        let sys = HamiltonianSystem::canonical(2, "p1^2 + q1^2").unwrap();
        let mut rng = grid::rng(42);
        let err = reduced_hamiltonian(&sys, &calogero_chart(), &MomentumValue(vec![0.0]), &mut rng);
        assert!(matches!(err, Err(Error::Precondition { .. })));
    }

    #[test]
    fn synthetic_magnetic_term() {
        let a = TranslationAction::new(3, &[vec![0.0, 0.0, 1.0]]).unwrap();
        let c = build_chart(&a, &names(&["q1", "q2", "q3"])).unwrap();
        let alpha = OneForm::parse(&["q1", "q2", "q3"], &["0", "q1", "2"]).unwrap();
        let mut rng = grid::rng(42);
        let beta = magnetic_term(&c, &alpha, &MomentumValue(vec![2.0]), 1e-9, &mut rng).unwrap();
        assert_eq!(beta.entry(0, 1), &Expr::Const(1.0));
        assert_eq!(beta.entry(1, 0), &Expr::Const(-1.0));

        let flat = c.flat_alpha(&MomentumValue(vec![2.0])).unwrap();
        let beta = magnetic_term(&c, &flat, &MomentumValue(vec![2.0]), 1e-9, &mut rng).unwrap();
        assert!(beta.is_identically_zero());

        let wrong = magnetic_term(&c, &alpha, &MomentumValue(vec![1.0]), 1e-9, &mut rng);
        assert!(matches!(wrong, Err(Error::Precondition { .. })));
    }

    #[test]
    fn shift_examples() {
        let alpha = OneForm::parse(&["q1", "q2"], &["1", "1"]).unwrap();
        let z = PhasePoint::new(vec![0.2, 0.7], vec![3.0, -1.0]);
        let s = momentum_shift(&z, &alpha).unwrap();
        assert_eq!(s.p, vec![2.0, -2.0]);
        let zero = OneForm::zero(names(&["q1", "q2"]));
        assert_eq!(momentum_shift(&z, &zero).unwrap(), z);
    }

    #[test]
    fn projection_of_calogero_potential() {
        let c = calogero_chart();
        let gamma = OneForm::exact(names(&["q1", "q2"]), parse("(q1-q2)^2").unwrap());
        let pts = grid::tensor(&[(1.0, 3.0)], 5);
        let mut rng = grid::rng(42);
        let (g, rep) = project_lagrangian(
            &gamma,
            &c,
            &MomentumValue(vec![0.0]),
            None,
            &pts,
            1e-9,
            &mut rng,
        )
        .unwrap();
        let v = g.eval(&[1.5]).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-14);
        assert_eq!(rep.magnetic_residual, 0.0);
    }

    #[test]
    fn magnetic_condition_examples() {
        let y = names(&["y1", "y2"]);
        let beta = TwoForm::from_upper(y.clone(), vec![Expr::one()]);
        let pts = grid::tensor(&[(-1.0, 1.0), (-1.0, 1.0)], 4);
        let good = OneForm::parse(&["y1", "y2"], &["2*y1", "-y1 + 1"]).unwrap();
        assert!(magnetic_condition_residual(&good, &beta, &pts).unwrap() <= 1e-12);
        let exact = OneForm::exact(y, parse("y1^2 + y2").unwrap());
        assert_eq!(
            magnetic_condition_residual(&exact, &beta, &pts).unwrap(),
            1.0
        );
    }
}
