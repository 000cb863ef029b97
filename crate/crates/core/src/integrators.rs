//! Canonical maps defined implicitly by generating functions.
//!
//! Type II: `p = ∂S/∂q (t, q, β)`, `Q = ∂S/∂β`, new point `(Q, β)`.
//! Type I: `p = ∂S/∂q (t, q, α)`, `β = −∂S/∂α`, new point `(α, β)`.
//! In both cases the parameter is found by Newton's method on
//! `∂S/∂q = p` with the mixed Hessian `∂²S/∂q∂a` as Jacobian.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{witness, Error, Result};
use crate::expr::{Bindings, Expr, ExprError};
use crate::grid::{self, SampleRng};
use crate::hj::{GeneratingFunction, Kind};
use crate::phase_space::{
    flow_reference, uniform_steps, HamiltonianSystem, PhasePoint, Sample, Trajectory,
};
use crate::symmetry::{covector_momentum, momentum_map, TranslationAction};

/// Newton tolerance on `‖∂S/∂q − p‖∞`, relative to `1 + ‖p‖∞`.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Mixed Hessians with `|det|` below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

const INVARIANCE_SAMPLES: usize = 200;
const INVARIANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: NEWTON_TOL,
            max_iter: NEWTON_MAX_ITER,
        }
    }
}

/// A generating function together with Newton settings and the last solved
/// parameter, reused as the next initial guess.
#[derive(Debug, Clone)]
pub struct ImplicitMap {
    s: GeneratingFunction,
    settings: NewtonSettings,
    warm: Option<Vec<f64>>,
}

/// Parameter value solving `∂S/∂q = p`, with its bindings.
struct Solved {
    a: Vec<f64>,
    b: Bindings,
}

impl ImplicitMap {
    pub fn new(s: GeneratingFunction) -> Self {
        ImplicitMap {
            s,
            settings: NewtonSettings::default(),
            warm: None,
        }
    }

    pub fn with_settings(mut self, settings: NewtonSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn generating(&self) -> &GeneratingFunction {
        &self.s
    }

    pub fn settings(&self) -> NewtonSettings {
        self.settings
    }

    /// Forgets the warm start.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    fn witness_at(&self, q: &[f64], a: &[f64]) -> crate::error::Witness {
        let names: Vec<String> = self
            .s
            .q_names()
            .iter()
            .chain(self.s.param_names())
            .cloned()
            .collect();
        let values: Vec<f64> = q.iter().chain(a).copied().collect();
        witness(&names, &values)
    }

    fn solve(&self, z: &PhasePoint, t: f64) -> Result<Solved> {
        let n = self.s.n();
        if z.n() != n || z.p.len() != n {
            return Err(Error::Dimension {
                what: "phase point",
                expected: n,
                got: z.n(),
            });
        }
        let mut a = match &self.warm {
            Some(w) if w.len() == n => w.clone(),
            _ => z.p.clone(),
        };
        let scale = 1.0 + z.p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut residual = f64::INFINITY;
        for _ in 0..self.settings.max_iter {
            let b = self.s.bind(t, &z.q, &a)?;
            let at = |e: Error| match e {
                Error::Expr(inner) => Error::at(inner, self.s.q_names(), &z.q),
                other => other,
            };
            let f: Vec<f64> = self
                .s
                .s_q(&b)
                .map_err(at)?
                .iter()
                .zip(&z.p)
                .map(|(s, p)| s - p)
                .collect();
            let jac = self.s.s_qa(&b).map_err(at)?;
            let det = jac.determinant();
            if det.is_nan() || det.abs() < SINGULAR_DET {
                return Err(Error::SingularJacobian {
                    det: det.abs(),
                    witness: self.witness_at(&z.q, &a),
                });
            }
            residual = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if residual <= self.settings.tol * scale {
                return Ok(Solved { a, b });
            }
            let step = jac
                .lu()
                .solve(&nalgebra::DVector::from_vec(f))
                .ok_or_else(|| Error::SingularJacobian {
                    det: det.abs(),
                    witness: self.witness_at(&z.q, &a),
                })?;
            for (ai, d) in a.iter_mut().zip(step.iter()) {
                *ai -= d;
            }
            if a.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        Err(Error::NewtonDivergence {
            iterations: self.settings.max_iter,
            residual,
        })
    }

    fn image(&self, solved: &Solved) -> Result<Vec<f64>> {
        let sa = self.s.s_a(&solved.b)?;
        Ok(match self.s.kind() {
            Kind::TypeII => sa.into_iter().chain(solved.a.iter().copied()).collect(),
            Kind::TypeI => solved
                .a
                .iter()
                .copied()
                .chain(sa.into_iter().map(|v| -v))
                .collect(),
        })
    }

    /// Applies the map at time `t`.
    pub fn apply(&mut self, z: &PhasePoint, t: f64) -> Result<PhasePoint> {
        let solved = self.solve(z, t)?;
        let out = self.image(&solved)?;
        self.warm = Some(solved.a);
        Ok(PhasePoint::from_slice(&out, z.t))
    }

    /// Jacobian `∂(Q, P)/∂(q, p)` from the implicit function theorem, with
    /// `A = ∂²S/∂q∂a`, `B = ∂²S/∂q²`, `C = ∂²S/∂a²`.
    pub fn jacobian(&mut self, z: &PhasePoint, t: f64) -> Result<DMatrix<f64>> {
        let solved = self.solve(z, t)?;
        let a = self.s.s_qa(&solved.b)?;
        let b = self.s.s_qq(&solved.b)?;
        let c = self.s.s_aa(&solved.b)?;
        self.warm = Some(solved.a.clone());
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularJacobian {
                det: a.determinant().abs(),
                witness: self.witness_at(&z.q, &solved.a),
            })?;
        let n = self.s.n();
        let da_dq = -(&a_inv * &b);
        let da_dp = a_inv.clone();
        let (top_q, top_p, bot_q, bot_p) = match self.s.kind() {
            Kind::TypeII => (a.transpose() + &c * &da_dq, &c * &a_inv, da_dq, da_dp),
            Kind::TypeI => (
                da_dq.clone(),
                da_dp.clone(),
                -(a.transpose() + &c * &da_dq),
                -(&c * &da_dp),
            ),
        };
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&top_q);
        m.view_mut((0, n), (n, n)).copy_from(&top_p);
        m.view_mut((n, 0), (n, n)).copy_from(&bot_q);
        m.view_mut((n, n), (n, n)).copy_from(&bot_p);
        Ok(m)
    }
}

fn expect_kind(s: &GeneratingFunction, kind: Kind) -> Result<()> {
    if s.kind() != kind {
        return Err(Error::Invalid(format!(
            "expected a {kind:?} generating function, got {:?}",
            s.kind()
        )));
    }
    Ok(())
}

/// `(q, p) ↦ (∂S/∂β, β)` where `∂S/∂q (t, q, β) = p`.
pub fn apply_type2(s: &GeneratingFunction, z: &PhasePoint, t: f64) -> Result<PhasePoint> {
    expect_kind(s, Kind::TypeII)?;
    ImplicitMap::new(s.clone()).apply(z, t)
}

/// `(q, p) ↦ (α, −∂S/∂α)` where `∂S/∂q (t, q, α) = p`.
pub fn apply_type1(s: &GeneratingFunction, z: &PhasePoint, t: f64) -> Result<PhasePoint> {
    expect_kind(s, Kind::TypeI)?;
    ImplicitMap::new(s.clone()).apply(z, t)
}

/// Canonical symplectic matrix `[[0, I], [−I, 0]]`.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, n + i)] = 1.0;
        w[(n + i, i)] = -1.0;
    }
    w
}

/// `max |(MᵀΩM − Ω)_ij|`.
pub fn symplecticity_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let w = omega(n);
    (m.transpose() * &w * m - w).amax()
}

/// Defect of the map's Jacobian at `z`.
pub fn symplecticity_check(map: &mut ImplicitMap, z: &PhasePoint, t: f64) -> Result<f64> {
    Ok(symplecticity_defect(&map.jacobian(z, t)?))
}

/// First-order scheme `S = qᵀβ + τ h(q, β)`, using the system's momentum
/// names for `β`.
pub fn euler_generator(sys: &HamiltonianSystem, tau: f64) -> Result<GeneratingFunction> {
    if sys.is_time_dependent() {
        return Err(Error::Invalid(
            "the symplectic Euler generator needs a time-independent hamiltonian".into(),
        ));
    }
    let c = sys.coords();
    let pairing = crate::expr::sum(
        c.q.iter()
            .zip(&c.p)
            .map(|(q, p)| Expr::var(q.clone()) * Expr::var(p.clone())),
    );
    let s = pairing + Expr::Const(tau) * sys.hamiltonian().clone();
    GeneratingFunction::new(Kind::TypeII, s, c.q.clone(), c.p.clone(), c.time_name())
}

/// Sampled check that `S(q + G g, β) − S(q, β)` does not depend on `q`,
/// i.e. that the graph of the map lies in a level set of `J∘π₁ − J∘π₂`.
/// Returns the first violation as `(residual, witness)`.
pub fn diagonal_invariance_violation(
    s: &GeneratingFunction,
    a: &TranslationAction,
    samples: usize,
    tol: f64,
    rng: &mut SampleRng,
) -> Result<Option<(f64, crate::error::Witness)>> {
    if a.n() != s.n() {
        return Err(Error::Dimension {
            what: "generating function vs action",
            expected: a.n(),
            got: s.n(),
        });
    }
    if a.k() == 0 {
        return Ok(None);
    }
    let n = s.n();
    let value = |q: &[f64], b: &[f64]| -> Result<f64, ExprError> {
        let bind = s
            .bind(0.0, q, b)
            .map_err(|e| ExprError::domain("S", e.to_string()))?;
        s.expr().eval(&bind)
    };
    let mut evaluated = 0;
    for _ in 0..samples {
        let q1 = grid::uniform_point(rng, n, -3.0, 3.0);
        let q2 = grid::uniform_point(rng, n, -3.0, 3.0);
        let beta = grid::uniform_point(rng, n, -3.0, 3.0);
        let g = grid::uniform_point(rng, a.k(), -2.0, 2.0);
        let diff = |q: &[f64]| -> Result<f64, ExprError> {
            let moved = a
                .act(&g, q)
                .map_err(|e| ExprError::domain("S", e.to_string()))?;
            Ok(value(&moved, &beta)? - value(q, &beta)?)
        };
        let (d1, d2) = match (diff(&q1), diff(&q2)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(ExprError::Domain { .. }), _) | (_, Err(ExprError::Domain { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        evaluated += 1;
        let r = (d1 - d2).abs();
        if r > tol * (1.0 + d1.abs()) {
            let names: Vec<String> = s.q_names().iter().chain(s.param_names()).cloned().collect();
            let values: Vec<f64> = q2.iter().chain(&beta).copied().collect();
            return Ok(Some((r, witness(&names, &values))));
        }
    }
    if evaluated == 0 {
        return Err(Error::Singular(
            "every invariance sample hit a singular point".into(),
        ));
    }
    Ok(None)
}

/// Iterates the map `steps` times from `z0` with time stamps `k τ`.
pub fn iterate(
    map: &mut ImplicitMap,
    z0: &PhasePoint,
    steps: usize,
    tau: f64,
) -> Result<Trajectory> {
    let mut z = z0.clone();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample {
        t: 0.0,
        point: z.clone(),
    });
    for k in 0..steps {
        z = map.apply(&z, 0.0)?;
        samples.push(Sample {
            t: tau * (k + 1) as f64,
            point: z.clone(),
        });
    }
    Ok(Trajectory { dt: tau, samples })
}

/// `max_k ‖J(z_k) − J(z_0)‖∞` along a trajectory.
pub fn momentum_drift(a: &TranslationAction, traj: &Trajectory) -> Result<f64> {
    Ok(momentum_drift_series(a, traj)?
        .into_iter()
        .fold(0.0, f64::max))
}

fn momentum_drift_series(a: &TranslationAction, traj: &Trajectory) -> Result<Vec<f64>> {
    let Some(first) = traj.samples.first() else {
        return Ok(Vec::new());
    };
    let j0 = momentum_map(a, &first.point)?;
    traj.samples
        .iter()
        .map(|s| {
            let j = momentum_map(a, &s.point)?;
            Ok(j.0
                .iter()
                .zip(&j0.0)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
        })
        .collect()
}

/// Iterates an invariant scheme and returns its momentum drift.
///
/// The diagonal invariance of `S` is checked first; a violation is reported
/// with its witness instead of running the scheme.
pub fn momentum_preservation_check(
    s: &GeneratingFunction,
    a: &TranslationAction,
    z0: &PhasePoint,
    n_steps: usize,
    rng: &mut SampleRng,
) -> Result<f64> {
    if let Some((residual, witness)) =
        diagonal_invariance_violation(s, a, INVARIANCE_SAMPLES, INVARIANCE_TOL, rng)?
    {
        return Err(Error::Precondition {
            what: "S is not invariant under the diagonal action".into(),
            residual,
            witness,
        });
    }
    momentum_drift_unchecked(s, a, z0, n_steps)
}

/// Same iteration without the invariance precondition (for controls).
pub fn momentum_drift_unchecked(
    s: &GeneratingFunction,
    a: &TranslationAction,
    z0: &PhasePoint,
    n_steps: usize,
) -> Result<f64> {
    expect_kind(s, Kind::TypeII)?;
    let traj = iterate(&mut ImplicitMap::new(s.clone()), z0, n_steps, 1.0)?;
    momentum_drift(a, &traj)
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeReport {
    pub tau: f64,
    pub steps: usize,
    pub newton: NewtonSettings,
    /// Largest symplecticity defect over the visited points.
    pub defect: f64,
    pub max_momentum_drift: f64,
    pub max_energy_drift: f64,
    /// `‖J(z_k) − J(z_0)‖∞` for every step.
    pub momentum_drift: Vec<f64>,
    /// `|h(z_k) − h(z_0)|` for every step.
    pub energy_drift: Vec<f64>,
}

/// Runs the first-order scheme for `sys` and collects defects and drifts.
pub fn run_scheme(
    sys: &HamiltonianSystem,
    a: &TranslationAction,
    tau: f64,
    z0: &PhasePoint,
    steps: usize,
) -> Result<(Trajectory, SchemeReport)> {
    let mut map = ImplicitMap::new(euler_generator(sys, tau)?);
    let traj = iterate(&mut map, z0, steps, tau)?;
    let mut defect = 0.0f64;
    let mut probe = ImplicitMap::new(map.generating().clone());
    for s in &traj.samples[..traj.len().saturating_sub(1)] {
        defect = defect.max(symplecticity_check(&mut probe, &s.point, 0.0)?);
    }
    let momentum_drift = momentum_drift_series(a, &traj)?;
    let h0 = sys.energy(&traj.samples[0].point)?;
    let energy_drift = traj
        .samples
        .iter()
        .map(|s| Ok((sys.energy(&s.point)? - h0).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let report = SchemeReport {
        tau,
        steps,
        newton: map.settings(),
        defect,
        max_momentum_drift: momentum_drift.iter().copied().fold(0.0, f64::max),
        max_energy_drift: energy_drift.iter().copied().fold(0.0, f64::max),
        momentum_drift,
        energy_drift,
    };
    Ok((traj, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSeries {
    pub times: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    /// `max_t ‖α(t) − α(0)‖∞ + ‖β(t) − β(0)‖∞`.
    pub max_var: f64,
}

/// Pushes the RK4 trajectory of `sys` from `z0` through the type I map of
/// a complete solution; the image should be constant.
pub fn transform_to_equilibrium(
    s: &GeneratingFunction,
    sys: &HamiltonianSystem,
    z0: &PhasePoint,
    t_end: f64,
    dt: f64,
) -> Result<EquilibriumSeries> {
    expect_kind(s, Kind::TypeI)?;
    let traj = flow_reference(sys, z0, t_end, dt)?;
    let mut map = ImplicitMap::new(s.clone());
    let n = s.n();
    let mut out = EquilibriumSeries {
        times: Vec::with_capacity(traj.len()),
        alpha: Vec::with_capacity(traj.len()),
        beta: Vec::with_capacity(traj.len()),
        max_var: 0.0,
    };
    for sample in &traj.samples {
        let w = map.apply(
            &PhasePoint::new(sample.point.q.clone(), sample.point.p.clone()),
            sample.t,
        )?;
        out.times.push(sample.t);
        out.alpha.push(w.q[..n].to_vec());
        out.beta.push(w.p[..n].to_vec());
    }
    let dev = |v: &[Vec<f64>], i: usize| -> f64 {
        v[i].iter()
            .zip(&v[0])
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    out.max_var = (0..out.times.len())
        .map(|i| dev(&out.alpha, i) + dev(&out.beta, i))
        .fold(0.0, f64::max);
    Ok(out)
}

/// `max |J(z) − J(Ψ_t(z))|` over the samples, with `Ψ_t` the RK4 flow.
pub fn flow_lagrangian_momentum_check(
    sys: &HamiltonianSystem,
    a: &TranslationAction,
    samples: &[PhasePoint],
    t: f64,
    dt: f64,
) -> Result<f64> {
    uniform_steps(t, dt)?;
    let mut worst = 0.0f64;
    for z in samples {
        let traj = flow_reference(sys, z, t, dt)?;
        let end = &traj.last().expect("at least one sample").point;
        let j0 = covector_momentum(a, &z.p)?;
        let j1 = covector_momentum(a, &end.p)?;
        worst =
            j0.0.iter()
                .zip(&j1.0)
                .fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf(kind: Kind, s: &str) -> GeneratingFunction {
        GeneratingFunction::parse(kind, s, &["q1"], &["b"]).unwrap()
    }

    fn calogero() -> HamiltonianSystem {
        HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)+1/(q1-q2)^2").unwrap()
    }

    fn diagonal() -> TranslationAction {
        TranslationAction::new(2, &[vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn identity_generator() {
        let s = gf(Kind::TypeII, "q1*b");
        let z = PhasePoint::new(vec![0.3], vec![-1.7]);
        assert_eq!(apply_type2(&s, &z, 0.0).unwrap(), z);
        let mut m = ImplicitMap::new(s);
        assert_eq!(symplecticity_check(&mut m, &z, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn oscillator_tau_step() {
        let s = gf(Kind::TypeII, "q1*b + 0.1*0.5*(b^2 + q1^2)");
        let z = apply_type2(&s, &PhasePoint::new(vec![1.0], vec![0.0]), 0.0).unwrap();
        assert!((z.q[0] - 0.99).abs() < 1e-15 && (z.p[0] + 0.1).abs() < 1e-15);
        let m = ImplicitMap::new(s)
            .jacobian(&PhasePoint::new(vec![1.0], vec![0.0]), 0.0)
            .unwrap();
        let want = [[0.99, 0.1], [-0.1, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
        assert!((m.determinant() - 1.0).abs() < 1e-15);
        assert!(symplecticity_defect(&m) < 1e-15);
    }

    #[test]
    fn singular_mixed_hessian() {
        let s = gf(Kind::TypeII, "q1^2*b");
        let r = apply_type2(&s, &PhasePoint::new(vec![0.0], vec![1.0]), 0.0);
        assert!(matches!(r, Err(Error::SingularJacobian { .. })));
        let s = gf(Kind::TypeI, "q1 + b^2");
        let r = apply_type1(&s, &PhasePoint::new(vec![1.0], vec![1.0]), 0.0);
        assert!(matches!(r, Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn type1_examples() {
        let s = gf(Kind::TypeI, "q1*b");
        let z = apply_type1(&s, &PhasePoint::new(vec![2.0], vec![5.0]), 0.0).unwrap();
        assert_eq!((z.q[0], z.p[0]), (5.0, -2.0));
        let s = gf(Kind::TypeI, "q1*b - t*b^2/2");
        let (q0, p0, t) = (0.7, -1.2, 0.4);
        let z = apply_type1(&s, &PhasePoint::new(vec![q0], vec![p0]), t).unwrap();
        assert_eq!(z.q[0], p0);
        assert!((z.p[0] - (t * p0 - q0)).abs() < 1e-15);
        let mut m = ImplicitMap::new(s);
        assert!(
            symplecticity_check(&mut m, &PhasePoint::new(vec![q0], vec![p0]), t).unwrap() < 1e-15
        );
    }

    #[test]
    fn kind_mismatch() {
        let s = gf(Kind::TypeI, "q1*b");
        assert!(matches!(
            apply_type2(&s, &PhasePoint::new(vec![0.0], vec![0.0]), 0.0),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn nonlinear_newton_converges() {
        let s = gf(Kind::TypeII, "q1*b + 0.2*sin(b)*q1^2 + 0.1*b^3");
        let z = PhasePoint::new(vec![0.5], vec![0.8]);
        let w = apply_type2(&s, &z, 0.0).unwrap();
        let b = s.bind(0.0, &z.q, &w.p).unwrap();
        assert!((s.s_q(&b).unwrap()[0] - 0.8).abs() < 1e-12);
        assert!((s.s_a(&b).unwrap()[0] - w.q[0]).abs() < 1e-15);
    }

    #[test]
    fn calogero_scheme_preserves_momentum() {
        let s = euler_generator(&calogero(), 1e-2).unwrap();
        let z0 = PhasePoint::new(vec![1.5, -0.5], vec![0.4, -0.1]);
        let mut rng = grid::rng(42);
        let drift = momentum_preservation_check(&s, &diagonal(), &z0, 1000, &mut rng).unwrap();
        assert!(drift <= 1e-10, "{drift}");
    }

    #[test]
    fn non_invariant_scheme_is_rejected() {
        let sys =
            HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)+1/(q1-q2)^2 + 0.5*q1^2").unwrap();
        let s = euler_generator(&sys, 1e-2).unwrap();
        let z0 = PhasePoint::new(vec![1.5, -0.5], vec![0.4, -0.1]);
        let mut rng = grid::rng(42);
        let r = momentum_preservation_check(&s, &diagonal(), &z0, 10, &mut rng);
        assert!(matches!(r, Err(Error::Precondition { .. })));
        assert!(momentum_drift_unchecked(&s, &diagonal(), &z0, 1000).unwrap() >= 1e-4);
    }

    #[test]
    fn trivial_group_has_no_drift() {
        let s = euler_generator(&calogero(), 1e-2).unwrap();
        let z0 = PhasePoint::new(vec![1.5, -0.5], vec![0.4, -0.1]);
        let a = TranslationAction::trivial(2);
        let mut rng = grid::rng(42);
        assert_eq!(
            momentum_preservation_check(&s, &a, &z0, 20, &mut rng).unwrap(),
            0.0
        );
    }

    #[test]
    fn oscillator_energy_stays_bounded() {
        let sys = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)").unwrap();
        let z0 = PhasePoint::new(vec![1.0], vec![0.0]);
        let tau = 0.1;
        let (_, r) = run_scheme(&sys, &TranslationAction::trivial(1), tau, &z0, 10_000).unwrap();
        assert!(r.max_energy_drift <= 10.0 * tau * tau);
        let half = r.energy_drift.len() / 2;
        let first = r.energy_drift[..half].iter().copied().fold(0.0, f64::max);
        let second = r.energy_drift[half..].iter().copied().fold(0.0, f64::max);
        assert!(second <= first * 1.01);
        assert!(r.defect < 1e-14);
    }

    #[test]
    fn free_particle_equilibrium() {
        let s = GeneratingFunction::parse(Kind::TypeI, "q1*a - t*a^2/2", &["q1"], &["a"]).unwrap();
        let sys = HamiltonianSystem::canonical(1, "p1^2/2").unwrap();
        let e =
            transform_to_equilibrium(&s, &sys, &PhasePoint::new(vec![2.0], vec![3.0]), 1.0, 0.01)
                .unwrap();
        assert!(e.max_var <= 1e-8);
        assert_eq!(e.alpha[0], vec![3.0]);
        assert_eq!(e.beta[0], vec![-2.0]);
        let e =
            transform_to_equilibrium(&s, &sys, &PhasePoint::new(vec![2.0], vec![3.0]), 0.0, 0.01)
                .unwrap();
        assert_eq!((e.times.len(), e.max_var), (1, 0.0));
    }

    #[test]
    fn flow_momentum_controls() {
        let z = vec![PhasePoint::new(vec![1.0, -1.0], vec![0.2, 0.5])];
        let r = flow_lagrangian_momentum_check(&calogero(), &diagonal(), &z, 1.0, 1e-3).unwrap();
        assert!(r <= 1e-8);
        assert_eq!(
            flow_lagrangian_momentum_check(&calogero(), &diagonal(), &z, 0.0, 1e-3).unwrap(),
            0.0
        );
        let bad = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)+q1^2").unwrap();
        let r = flow_lagrangian_momentum_check(&bad, &diagonal(), &z, 1.0, 1e-3).unwrap();
        assert!(r > 0.1, "{r}");
    }
}
