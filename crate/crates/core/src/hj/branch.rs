//! Implicitly defined momenta and their quadratures as expression
//! primitives.
//!
//! A [`Branch`] is the solution `p(y, a)` of `R(y, p, a) = 0` with a fixed
//! sign of `p`, where `a` are parameters. Functions of the branch are
//! differentiated with the implicit function theorem,
//! `∂p/∂y = −R_y/R_p` and `∂p/∂a = −R_a/R_p`, so expressions holding them
//! stay closed under [`Expr::differentiate`].

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, ExprError, Primitive};

/// Root tolerance on the residual `R`.
pub const ROOT_TOL: f64 = 1e-12;
const MAX_BRACKET: f64 = 1e15;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSign {
    Positive,
    Negative,
}

impl BranchSign {
    pub fn value(self) -> f64 {
        match self {
            BranchSign::Positive => 1.0,
            BranchSign::Negative => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Result<Self> {
        if s > 0.0 {
            Ok(BranchSign::Positive)
        } else if s < 0.0 {
            Ok(BranchSign::Negative)
        } else {
            Err(Error::Invalid("branch sign must be nonzero".into()))
        }
    }
}

#[derive(Debug)]
pub struct Branch {
    residual: Expr,
    dr_dp: Expr,
    y: String,
    p: String,
    params: Vec<String>,
    sign: BranchSign,
    last: Mutex<Option<(Vec<f64>, f64)>>,
}

impl Branch {
    /// `residual` is an expression in `y`, `p` and `params` only.
    pub fn new(
        residual: Expr,
        y: &str,
        p: &str,
        params: &[String],
        sign: BranchSign,
    ) -> Result<Arc<Branch>> {
        let allowed: Vec<&str> = [y, p]
            .into_iter()
            .chain(params.iter().map(String::as_str))
            .collect();
        if let Some(v) = residual
            .free_vars()
            .into_iter()
            .find(|v| !allowed.contains(&v.as_str()))
        {
            return Err(Error::Invalid(format!(
                "branch residual depends on undeclared variable `{v}`"
            )));
        }
        let dr_dp = residual.differentiate(p);
        Ok(Arc::new(Branch {
            residual,
            dr_dp,
            y: y.to_string(),
            p: p.to_string(),
            params: params.to_vec(),
            sign,
            last: Mutex::new(None),
        }))
    }

    pub fn arity(&self) -> usize {
        1 + self.params.len()
    }

    pub fn y(&self) -> &str {
        &self.y
    }

    pub fn p(&self) -> &str {
        &self.p
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn sign(&self) -> BranchSign {
        self.sign
    }

    pub fn residual(&self) -> &Expr {
        &self.residual
    }

    fn bindings(&self, args: &[f64]) -> Bindings {
        let mut b = Bindings::new();
        b.set(self.y.clone(), args[0]);
        for (n, v) in self.params.iter().zip(&args[1..]) {
            b.set(n.clone(), *v);
        }
        b
    }

    fn eval_at(&self, b: &mut Bindings, p: f64) -> Result<(f64, f64), ExprError> {
        b.set(self.p.clone(), p);
        Ok((self.residual.eval(b)?, self.dr_dp.eval(b)?))
    }

    /// `p(y, a)` on the branch. `args = [y, a...]`.
    pub fn root(&self, args: &[f64], guess: Option<f64>) -> Result<f64> {
        if args.len() != self.arity() {
            return Err(Error::Dimension {
                what: "branch arguments",
                expected: self.arity(),
                got: args.len(),
            });
        }
        let guess = guess.or_else(|| {
            self.last
                .lock()
                .ok()
                .and_then(|g| g.as_ref().map(|(_, p)| *p))
        });
        let p = self.solve(args, guess)?;
        if let Ok(mut g) = self.last.lock() {
            *g = Some((args.to_vec(), p));
        }
        Ok(p)
    }

    fn turning(&self, args: &[f64]) -> Error {
        Error::TurningPoint {
            at: self.y.clone(),
            value: args[0],
        }
    }

    fn solve(&self, args: &[f64], guess: Option<f64>) -> Result<f64> {
        let s = self.sign.value();
        let mut b = self.bindings(args);
        if let Some(g) = guess.filter(|g| g * s > 0.0) {
            if let Some(p) = self.newton(&mut b, g)? {
                return Ok(p);
            }
        }
        // f(u) = R(y, s u) must start negative and change sign for u > 0.
        let f0 = self.eval_at(&mut b, 0.0)?.0;
        if f0 >= 0.0 {
            return Err(self.turning(args));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        loop {
            let f = self.eval_at(&mut b, s * hi)?.0;
            if f >= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > MAX_BRACKET {
                return Err(self.turning(args));
            }
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..MAX_ITER {
            let (f, df) = self.eval_at(&mut b, s * u)?;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let step = u - f / (s * df);
            if step.is_finite() && step > lo && step < hi {
                let done = (step - u).abs() <= 4.0 * f64::EPSILON * (1.0 + u);
                u = step;
                if done {
                    break;
                }
            } else {
                u = 0.5 * (lo + hi);
            }
        }
        self.accept(&mut b, s * u, args)
    }

    /// Plain Newton from a nearby guess. `None` when it wanders off.
    fn newton(&self, b: &mut Bindings, guess: f64) -> Result<Option<f64>> {
        let s = self.sign.value();
        let mut p = guess;
        for _ in 0..12 {
            let (f, df) = match self.eval_at(b, p) {
                Ok(v) => v,
                Err(_) => return Ok(None),
            };
            if f == 0.0 {
                break;
            }
            let next = p - f / df;
            if !next.is_finite() || next * s <= 0.0 {
                return Ok(None);
            }
            let done = (next - p).abs() <= 4.0 * f64::EPSILON * (1.0 + p.abs());
            p = next;
            if done {
                break;
            }
        }
        match self.eval_at(b, p) {
            Ok((f, df)) if f.abs() <= ROOT_TOL && df * s > 0.0 => Ok(Some(p)),
            _ => Ok(None),
        }
    }

    fn accept(&self, b: &mut Bindings, p: f64, args: &[f64]) -> Result<f64> {
        let (f, df) = self.eval_at(b, p)?;
        if df * self.sign.value() <= 0.0 {
            return Err(Error::BranchAmbiguity {
                at: self.y.clone(),
                value: args[0],
            });
        }
        if f.abs() > ROOT_TOL {
            return Err(Error::NewtonDivergence {
                iterations: MAX_ITER,
                residual: f.abs(),
            });
        }
        Ok(p)
    }

    /// `∂p/∂v = −R_v / R_p` as an expression in `y`, `p`, `a`.
    fn implicit_partial(&self, var: &str) -> Expr {
        (-(self.residual.differentiate(var)) / self.dr_dp.clone()).simplify()
    }

    /// Total derivative of `f(y, p(y, a), a)` with respect to the argument
    /// `index` (0 for `y`, `1 + j` for the `j`-th parameter).
    fn total_derivative(&self, f: &Expr, index: usize) -> Expr {
        let var = if index == 0 {
            &self.y
        } else {
            &self.params[index - 1]
        };
        let fp = f.differentiate(&self.p);
        let direct = f.differentiate(var);
        if fp.is_zero() {
            direct
        } else {
            (direct + fp * self.implicit_partial(var)).simplify()
        }
    }
}

/// `F(y, p(y, a), a)` as a function of `(y, a)`.
#[derive(Debug)]
pub struct OnBranch {
    branch: Arc<Branch>,
    f: Expr,
    name: String,
    hint: Option<Arc<Table>>,
}

impl OnBranch {
    pub fn new(branch: Arc<Branch>, f: Expr, name: impl Into<String>) -> Arc<OnBranch> {
        Arc::new(OnBranch {
            branch,
            f,
            name: name.into(),
            hint: None,
        })
    }

    pub(crate) fn with_hint(
        branch: Arc<Branch>,
        f: Expr,
        name: impl Into<String>,
        hint: Arc<Table>,
    ) -> Arc<OnBranch> {
        Arc::new(OnBranch {
            branch,
            f,
            name: name.into(),
            hint: Some(hint),
        })
    }
}

fn eval_on(branch: &Branch, f: &Expr, args: &[f64], p: f64) -> Result<f64, ExprError> {
    let mut b = branch.bindings(args);
    b.set(branch.p.clone(), p);
    f.eval(&b)
}

fn to_expr_error(e: Error, name: &str) -> ExprError {
    match e {
        Error::Expr(inner) => inner,
        other => ExprError::domain(name, other.to_string()),
    }
}

impl Primitive for OnBranch {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> usize {
        self.branch.arity()
    }

    fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        let guess = self.hint.as_ref().and_then(|t| t.derivative_hint(args[0]));
        let p = self
            .branch
            .root(args, guess)
            .map_err(|e| to_expr_error(e, &self.name))?;
        eval_on(&self.branch, &self.f, args, p)
    }

    fn partial(&self, index: usize) -> Arc<dyn Primitive> {
        Arc::new(OnBranch {
            branch: self.branch.clone(),
            f: self.branch.total_derivative(&self.f, index),
            name: format!("d{}_{index}", self.name),
            hint: self.hint.clone(),
        })
    }
}

/// `∫_{y0}^{y} F(s, p(s, a), a) ds` by composite Simpson.
#[derive(Debug)]
pub struct BranchIntegral {
    branch: Arc<Branch>,
    f: Expr,
    y0: f64,
    panels: usize,
    name: String,
}

/// Default number of Simpson panels for [`BranchIntegral`].
pub const DEFAULT_PANELS: usize = 256;

impl BranchIntegral {
    pub fn new(
        branch: Arc<Branch>,
        f: Expr,
        y0: f64,
        panels: usize,
        name: impl Into<String>,
    ) -> Arc<BranchIntegral> {
        Arc::new(BranchIntegral {
            branch,
            f,
            y0,
            panels: (panels.max(2) + 1) & !1,
            name: name.into(),
        })
    }
}

impl Primitive for BranchIntegral {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> usize {
        self.branch.arity()
    }

    fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        let y = args[0];
        if y == self.y0 {
            return Ok(0.0);
        }
        let n = self.panels;
        let h = (y - self.y0) / n as f64;
        let mut at = args.to_vec();
        let mut guess = None;
        let mut acc = 0.0;
        for i in 0..=n {
            at[0] = self.y0 + h * i as f64;
            let p = self
                .branch
                .root(&at, guess)
                .map_err(|e| to_expr_error(e, &self.name))?;
            guess = Some(p);
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * eval_on(&self.branch, &self.f, &at, p)?;
        }
        Ok(acc * h / 3.0)
    }

    fn partial(&self, index: usize) -> Arc<dyn Primitive> {
        if index == 0 {
            OnBranch::new(
                self.branch.clone(),
                self.f.clone(),
                format!("d{}_0", self.name),
            )
        } else {
            Arc::new(BranchIntegral {
                branch: self.branch.clone(),
                f: self.branch.total_derivative(&self.f, index),
                y0: self.y0,
                panels: self.panels,
                name: format!("d{}_{index}", self.name),
            })
        }
    }
}

/// Tabulated antiderivative: nodes, values and derivatives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
}

impl Table {
    fn locate(&self, y: f64) -> Option<usize> {
        let (lo, hi) = (self.y[0], *self.y.last()?);
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(y >= lo - slack && y <= hi + slack) {
            return None;
        }
        let i = self.y.partition_point(|&v| v <= y);
        Some(i.clamp(1, self.y.len() - 1) - 1)
    }

    /// Cubic Hermite interpolation of `w` using `dw` as slopes.
    pub fn value(&self, y: f64) -> Option<f64> {
        let i = self.locate(y)?;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let h = y1 - y0;
        let s = (y - y0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(
            h00 * self.w[i] + h10 * h * self.dw[i] + h01 * self.w[i + 1] + h11 * h * self.dw[i + 1],
        )
    }

    /// Linear interpolation of `dw`, used as a Newton starting point.
    fn derivative_hint(&self, y: f64) -> Option<f64> {
        let i = self.locate(y)?;
        let s = (y - self.y[i]) / (self.y[i + 1] - self.y[i]);
        Some(self.dw[i] + s * (self.dw[i + 1] - self.dw[i]))
    }
}

/// `W̄(y)` from a [`Table`]; its derivative is the exact branch momentum.
#[derive(Debug)]
pub struct TabulatedIntegral {
    table: Arc<Table>,
    branch: Arc<Branch>,
    name: String,
}

impl TabulatedIntegral {
    pub(crate) fn new(table: Arc<Table>, branch: Arc<Branch>, name: impl Into<String>) -> Self {
        TabulatedIntegral {
            table,
            branch,
            name: name.into(),
        }
    }
}

impl Primitive for TabulatedIntegral {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> usize {
        1
    }

    fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        self.table
            .value(args[0])
            .ok_or_else(|| ExprError::domain(&self.name, format!("{} outside the table", args[0])))
    }

    fn partial(&self, _index: usize) -> Arc<dyn Primitive> {
        let p = Expr::var(self.branch.p.clone());
        OnBranch::with_hint(
            self.branch.clone(),
            p,
            format!("d{}", self.name),
            self.table.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn calogero_branch() -> Arc<Branch> {
        Branch::new(
            parse("p^2 + 1/q^2 - 2").unwrap(),
            "q",
            "p",
            &[],
            BranchSign::Positive,
        )
        .unwrap()
    }

    #[test]
    fn root_matches_closed_form() {
        let b = calogero_branch();
        let p = b.root(&[2.0], None).unwrap();
        assert!((p - 1.75f64.sqrt()).abs() < 1e-14);
        let neg = Branch::new(b.residual().clone(), "q", "p", &[], BranchSign::Negative).unwrap();
        assert!((neg.root(&[2.0], None).unwrap() + 1.75f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn turning_point_reported() {
        let b = calogero_branch();
        assert!(matches!(
            b.root(&[0.5], None),
            Err(Error::TurningPoint { .. })
        ));
    }

    #[test]
    fn on_branch_derivatives_follow_implicit_rule() {
        let b = calogero_branch();
        let p = Expr::apply(OnBranch::new(b, Expr::var("p"), "P"), vec![Expr::var("q")]);
        let dp = p.differentiate("q");
        // p = sqrt(2 - q^-2): p' = q^-3 / p
        let q: f64 = 1.7;
        let exact = q.powi(-3) / (2.0 - q.powi(-2)).sqrt();
        let got = dp.eval(&Bindings::new().with("q", q)).unwrap();
        assert!((got - exact).abs() < 1e-13);
    }

    #[test]
    fn branch_integral_and_parameter_derivative() {
        // p = sqrt(2E - q^2): ∫_0^q p = (q p + 2E asin(q/√(2E)))/2
        let b = Branch::new(
            parse("0.5*(p^2 + q^2) - E").unwrap(),
            "q",
            "p",
            &["E".to_string()],
            BranchSign::Positive,
        )
        .unwrap();
        let w = Expr::apply(
            BranchIntegral::new(b.clone(), Expr::var("p"), 0.0, 256, "W"),
            vec![Expr::var("q"), Expr::var("E")],
        );
        let (q, e) = (0.5, 0.625);
        let bind = Bindings::new().with("q", q).with("E", e);
        let r = (2.0 * e).sqrt();
        let p = (2.0 * e - q * q).sqrt();
        let exact = 0.5 * (q * p + 2.0 * e * (q / r).asin());
        assert!((w.eval(&bind).unwrap() - exact).abs() < 1e-12);
        // ∂W/∂E = asin(q/√(2E))
        let dw = w.differentiate("E").eval(&bind).unwrap();
        assert!((dw - (q / r).asin()).abs() < 1e-11);
        assert!((w.differentiate("q").eval(&bind).unwrap() - p).abs() < 1e-14);
    }

    #[test]
    fn hermite_table_is_exact_on_cubics() {
        let y: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        let t = Table {
            w: y.iter().map(|v| v * v * v).collect(),
            dw: y.iter().map(|v| 3.0 * v * v).collect(),
            y,
        };
        assert!((t.value(1.3).unwrap() - 1.3f64.powi(3)).abs() < 1e-14);
        assert!(t.value(2.5).is_none());
    }
}
