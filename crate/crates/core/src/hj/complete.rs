use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::branch::{Branch, BranchIntegral, BranchSign};
use crate::error::{witness, Error, Result};
use crate::expr::{Bindings, Expr};
use crate::forms::OneForm;
use crate::phase_space::HamiltonianSystem;
use crate::reduction::located;

/// Which partials of `S` define the canonical map.
///
/// Type I: `p = ∂S/∂q`, `β = −∂S/∂α`. Type II: `p = ∂S/∂q`, `Q = ∂S/∂β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "type1")]
    TypeI,
    #[serde(rename = "type2")]
    TypeII,
}

#[derive(Debug)]
struct Derivatives {
    s_t: Expr,
    s_q: Vec<Expr>,
    s_a: Vec<Expr>,
    s_qa: Vec<Vec<Expr>>,
    s_qq: Vec<Vec<Expr>>,
    s_aa: Vec<Vec<Expr>>,
}

/// A generating function `S(t, q, a)` with `a = α` (type I) or `a = β`
/// (type II). All partials up to second order are computed symbolically
/// once, at construction.
#[derive(Debug, Clone)]
pub struct GeneratingFunction {
    kind: Kind,
    s: Expr,
    q: Vec<String>,
    params: Vec<String>,
    time: String,
    d: Arc<Derivatives>,
}

fn hessian(e: &[Expr], vars: &[String]) -> Vec<Vec<Expr>> {
    e.iter().map(|g| g.gradient(vars)).collect()
}

impl GeneratingFunction {
    pub fn new(
        kind: Kind,
        s: Expr,
        q: Vec<String>,
        params: Vec<String>,
        time: &str,
    ) -> Result<Self> {
        if q.len() != params.len() {
            return Err(Error::Dimension {
                what: "generating function parameters",
                expected: q.len(),
                got: params.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::Invalid(
                "generating function needs at least one variable".into(),
            ));
        }
        let declared: Vec<&String> = q.iter().chain(&params).collect();
        for (i, a) in declared.iter().enumerate() {
            if a.as_str() == time || declared[..i].contains(a) {
                return Err(Error::Invalid(format!("variable `{a}` declared twice")));
            }
        }
        if let Some(v) = s
            .free_vars()
            .into_iter()
            .find(|v| v != time && !declared.contains(&v))
        {
            return Err(Error::Invalid(format!(
                "generating function depends on undeclared variable `{v}`"
            )));
        }
        let s_q = s.gradient(&q);
        let s_a = s.gradient(&params);
        let d = Derivatives {
            s_t: s.differentiate(time),
            s_qa: hessian(&s_q, &params),
            s_qq: hessian(&s_q, &q),
            s_aa: hessian(&s_a, &params),
            s_q,
            s_a,
        };
        Ok(GeneratingFunction {
            kind,
            s,
            q,
            params,
            time: time.to_string(),
            d: Arc::new(d),
        })
    }

    /// Parses `S` with time variable `t`.
    pub fn parse(kind: Kind, text: &str, q: &[&str], params: &[&str]) -> Result<Self> {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self::new(
            kind,
            crate::expr::parse(text)?,
            owned(q),
            owned(params),
            "t",
        )
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn expr(&self) -> &Expr {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q_names(&self) -> &[String] {
        &self.q
    }

    pub fn param_names(&self) -> &[String] {
        &self.params
    }

    pub fn time_name(&self) -> &str {
        &self.time
    }

    pub fn bind(&self, t: f64, q: &[f64], a: &[f64]) -> Result<Bindings> {
        for (what, v) in [
            ("generating function position", q),
            ("generating function parameter", a),
        ] {
            if v.len() != self.n() {
                return Err(Error::Dimension {
                    what,
                    expected: self.n(),
                    got: v.len(),
                });
            }
        }
        let mut b = Bindings::new();
        b.set(self.time.clone(), t);
        b.assign(&self.q, q);
        b.assign(&self.params, a);
        Ok(b)
    }

    fn eval_vec(v: &[Expr], b: &Bindings) -> Result<Vec<f64>> {
        Ok(v.iter().map(|e| e.eval(b)).collect::<Result<_, _>>()?)
    }

    fn eval_mat(m: &[Vec<Expr>], b: &Bindings) -> Result<DMatrix<f64>> {
        let n = m.len();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in m.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                out[(i, j)] = e.eval(b)?;
            }
        }
        Ok(out)
    }

    pub fn value(&self, b: &Bindings) -> Result<f64> {
        Ok(self.s.eval(b)?)
    }

    pub fn s_t(&self, b: &Bindings) -> Result<f64> {
        Ok(self.d.s_t.eval(b)?)
    }

    pub fn s_q(&self, b: &Bindings) -> Result<Vec<f64>> {
        Self::eval_vec(&self.d.s_q, b)
    }

    pub fn s_a(&self, b: &Bindings) -> Result<Vec<f64>> {
        Self::eval_vec(&self.d.s_a, b)
    }

    /// `∂²S/∂q_i∂a_j`.
    pub fn s_qa(&self, b: &Bindings) -> Result<DMatrix<f64>> {
        Self::eval_mat(&self.d.s_qa, b)
    }

    pub fn s_qq(&self, b: &Bindings) -> Result<DMatrix<f64>> {
        Self::eval_mat(&self.d.s_qq, b)
    }

    pub fn s_aa(&self, b: &Bindings) -> Result<DMatrix<f64>> {
        Self::eval_mat(&self.d.s_aa, b)
    }

    /// Symbolic `∂S/∂q` (used to build 1-forms at fixed parameters).
    pub fn s_q_exprs(&self) -> &[Expr] {
        &self.d.s_q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessReport {
    /// `max |∂S/∂t + h(q, ∂S/∂q)|` over the grid.
    pub hj_max_dev: f64,
    /// `min |det ∂²S/∂q∂a|` over the grid.
    pub min_abs_det: f64,
    /// Grid point (`t`, `q`, `a`) where the determinant is smallest.
    pub min_det_at: Vec<(String, f64)>,
}

impl CompletenessReport {
    pub fn is_complete(&self, tol: f64, delta: f64) -> bool {
        self.hj_max_dev <= tol && self.min_abs_det >= delta
    }
}

/// Checks the two conditions of a complete solution on a grid of points
/// laid out as `[t, q_1..q_n, a_1..a_n]`.
pub fn check_complete(
    s: &GeneratingFunction,
    sys: &HamiltonianSystem,
    grid: &[Vec<f64>],
) -> Result<CompletenessReport> {
    let n = s.n();
    let coords = sys.coords();
    if coords.n() != n {
        return Err(Error::Dimension {
            what: "system vs generating function",
            expected: n,
            got: coords.n(),
        });
    }
    if grid.is_empty() {
        return Err(Error::Invalid("empty grid".into()));
    }
    let names: Vec<String> = std::iter::once(s.time.clone())
        .chain(s.q.iter().cloned())
        .chain(s.params.iter().cloned())
        .collect();
    let mut report = CompletenessReport {
        hj_max_dev: 0.0,
        min_abs_det: f64::INFINITY,
        min_det_at: Vec::new(),
    };
    for pt in grid {
        if pt.len() != 1 + 2 * n {
            return Err(Error::Dimension {
                what: "completeness grid point",
                expected: 1 + 2 * n,
                got: pt.len(),
            });
        }
        let at = |e: Error| located(e, &names, pt);
        let (t, q, a) = (pt[0], &pt[1..=n], &pt[n + 1..]);
        let b = s.bind(t, q, a)?;
        let p = s.s_q(&b).map_err(at)?;
        let mut hb = Bindings::new();
        hb.assign(&coords.q, q);
        hb.assign(&coords.p, &p);
        hb.set(coords.time_name(), t);
        let h = sys.hamiltonian().eval(&hb).map_err(|e| at(e.into()))?;
        let dev = (s.s_t(&b).map_err(at)? + h).abs();
        report.hj_max_dev = report.hj_max_dev.max(dev);
        let det = s.s_qa(&b).map_err(at)?.determinant().abs();
        if det < report.min_abs_det {
            report.min_abs_det = det;
            report.min_det_at = witness(&names, pt);
        }
    }
    Ok(report)
}

/// `S(t, q) = W(q) − t E`, a solution of `∂S/∂t + h = 0`.
#[derive(Debug, Clone)]
pub struct TimeDependentSolution {
    pub s: Expr,
    pub vars: Vec<String>,
    pub time: String,
    pub energy: f64,
}

/// Extends a time-independent solution `W` with energy `E`.
pub fn time_extension(w: &OneForm, energy: f64, time: &str) -> Result<TimeDependentSolution> {
    let pot = w
        .potential()
        .ok_or_else(|| Error::Invalid("time extension needs the potential W".into()))?;
    if w.vars().iter().any(|v| v == time) {
        return Err(Error::Invalid(format!(
            "`{time}` is already a configuration variable"
        )));
    }
    let s = if energy == 0.0 {
        pot.clone()
    } else {
        pot.clone() - Expr::Const(energy) * Expr::var(time)
    };
    Ok(TimeDependentSolution {
        s,
        vars: w.vars().to_vec(),
        time: time.to_string(),
        energy,
    })
}

impl TimeDependentSolution {
    /// `max |∂S/∂t + h(q, ∂S/∂q)|` over `grid × times`.
    pub fn residual(
        &self,
        sys: &HamiltonianSystem,
        grid: &[Vec<f64>],
        times: &[f64],
    ) -> Result<f64> {
        let coords = sys.coords();
        if coords.q != self.vars {
            return Err(Error::Invalid(
                "solution and system use different configuration names".into(),
            ));
        }
        let s_t = self.s.differentiate(&self.time);
        let s_q = self.s.gradient(&self.vars);
        let mut worst = 0.0f64;
        for q in grid {
            for &t in times {
                let at = |e: Error| located(e, &self.vars, q);
                let mut b = Bindings::new();
                b.assign(&self.vars, q);
                b.set(self.time.clone(), t);
                let p = s_q
                    .iter()
                    .map(|e| e.eval(&b))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| at(e.into()))?;
                b.assign(&coords.p, &p);
                if coords.time_name() != self.time {
                    b.set(coords.time_name(), t);
                }
                let r = s_t.eval(&b).map_err(|e| at(e.into()))?
                    + sys.hamiltonian().eval(&b).map_err(|e| at(e.into()))?;
                worst = worst.max(r.abs());
            }
        }
        Ok(worst)
    }
}

/// Complete type I solution of a 1-D problem by quadrature:
/// `S(t, q, α) = ∫_{q0}^{q} p(s, α) ds − t α` where `h(s, p(s, α)) = α`.
pub fn quadrature_complete_solution(
    h: &Expr,
    q: &str,
    p: &str,
    alpha: &str,
    sign: BranchSign,
    q0: f64,
    panels: usize,
) -> Result<GeneratingFunction> {
    let residual = (h.clone() - Expr::var(alpha)).simplify();
    let branch: Arc<Branch> = Branch::new(residual, q, p, &[alpha.to_string()], sign)?;
    let w = Expr::apply(
        BranchIntegral::new(branch, Expr::var(p), q0, panels, "W"),
        vec![Expr::var(q), Expr::var(alpha)],
    );
    let s = w - Expr::var(alpha) * Expr::var("t");
    GeneratingFunction::new(Kind::TypeI, s, vec![q.into()], vec![alpha.into()], "t")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::grid;

    #[test]
    fn free_particle_is_complete() {
        let s = GeneratingFunction::parse(Kind::TypeI, "q1*a - t*a^2/2", &["q1"], &["a"]).unwrap();
        let sys = HamiltonianSystem::canonical(1, "p1^2/2").unwrap();
        let pts = grid::tensor(&[(0.0, 1.0), (-2.0, 2.0), (-3.0, 3.0)], 5);
        let r = check_complete(&s, &sys, &pts).unwrap();
        assert_eq!(r.hj_max_dev, 0.0);
        assert_eq!(r.min_abs_det, 1.0);
    }

    #[test]
    fn oscillator_identity_generator_is_not_complete() {
        let s = GeneratingFunction::parse(Kind::TypeII, "q1*b", &["q1"], &["b"]).unwrap();
        let sys = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)").unwrap();
        let pts = grid::tensor(&[(0.0, 0.0), (-1.0, 1.0), (-1.0, 1.0)], 3);
        let r = check_complete(&s, &sys, &pts).unwrap();
        assert_eq!(r.min_abs_det, 1.0);
        assert!(!r.is_complete(1e-8, 1e-6));
    }

    #[test]
    fn undeclared_variable_rejected() {
        let r = GeneratingFunction::parse(Kind::TypeI, "q1*a + z", &["q1"], &["a"]);
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn time_extension_of_free_particle() {
        let w = OneForm::exact(vec!["q1".into()], parse("3*q1").unwrap());
        let s = time_extension(&w, 4.5, "t").unwrap();
        let sys = HamiltonianSystem::canonical(1, "p1^2/2").unwrap();
        let pts = grid::tensor(&[(-1.0, 1.0)], 5);
        assert_eq!(s.residual(&sys, &pts, &[0.0, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn oscillator_quadrature_solution() {
        let h = parse("0.5*(p^2 + q^2)").unwrap();
        let s = quadrature_complete_solution(&h, "q", "p", "E", BranchSign::Positive, 0.0, 256)
            .unwrap();
        let sys = HamiltonianSystem::new(
            crate::phase_space::Coordinates::new(["q"], ["p"]).unwrap(),
            h,
        )
        .unwrap();
        let pts = grid::tensor(&[(0.0, 1.0), (-0.5, 0.5), (0.6, 0.7)], 3);
        let r = check_complete(&s, &sys, &pts).unwrap();
        assert!(r.hj_max_dev < 1e-12, "{r:?}");
        assert!(r.min_abs_det > 0.5);
    }
}
