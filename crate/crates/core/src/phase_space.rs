//! Canonical phase space `T*R^n`, Hamiltonian vector fields and the RK4
//! reference flow.
//!
//! The reference flow is deliberately not symplectic. It is the ground
//! truth that the generating-function maps in [`crate::integrators`] are
//! measured against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr};

/// Names of the canonical coordinates, plus an optional time variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coordinates {
    pub q: Vec<String>,
    pub p: Vec<String>,
    pub t: Option<String>,
}

impl Coordinates {
    pub fn new<S: Into<String>>(
        q: impl IntoIterator<Item = S>,
        p: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let q: Vec<String> = q.into_iter().map(Into::into).collect();
        let p: Vec<String> = p.into_iter().map(Into::into).collect();
        if q.len() != p.len() {
            return Err(Error::Dimension {
                what: "momentum names",
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::Invalid(
                "configuration space must have n >= 1".into(),
            ));
        }
        Ok(Coordinates { q, p, t: None })
    }

    /// `q1..qn`, `p1..pn`.
    pub fn canonical(n: usize) -> Self {
        Coordinates {
            q: (1..=n).map(|i| format!("q{i}")).collect(),
            p: (1..=n).map(|i| format!("p{i}")).collect(),
            t: None,
        }
    }

    pub fn with_time(mut self, name: impl Into<String>) -> Self {
        self.t = Some(name.into());
        self
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn time_name(&self) -> &str {
        self.t.as_deref().unwrap_or("t")
    }

    pub fn bind(&self, z: &PhasePoint) -> Bindings {
        let mut b = Bindings::new();
        b.assign(&self.q, &z.q);
        b.assign(&self.p, &z.p);
        if let Some(t) = z.t {
            b.set(self.time_name(), t);
        }
        b
    }

    pub(crate) fn check(&self, z: &PhasePoint) -> Result<()> {
        if z.q.len() != self.n() || z.p.len() != self.n() {
            return Err(Error::Dimension {
                what: "phase point",
                expected: self.n(),
                got: if z.q.len() != self.n() {
                    z.q.len()
                } else {
                    z.p.len()
                },
            });
        }
        Ok(())
    }
}

/// A covector `α_q`: base point `q`, fiber coordinates `p`, optional time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        PhasePoint { q, p, t: None }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// `(q, p)` flattened.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }

    pub fn from_slice(state: &[f64], t: Option<f64>) -> Self {
        let n = state.len() / 2;
        PhasePoint {
            q: state[..n].to_vec(),
            p: state[n..].to_vec(),
            t,
        }
    }
}

/// A tangent vector to `T*R^n`, ordered `(dq, dp)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

impl Tangent {
    pub fn new(dq: Vec<f64>, dp: Vec<f64>) -> Self {
        Tangent { dq, dp }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dq.clone();
        v.extend_from_slice(&self.dp);
        v
    }
}

/// `ω(u, v) = Σ_i (u_q^i v_p_i − u_p_i v_q^i)`.
pub fn symplectic_pairing(u: &Tangent, v: &Tangent) -> Result<f64> {
    let n = u.dq.len();
    for (what, len) in [
        ("pairing: u momenta", u.dp.len()),
        ("pairing: v positions", v.dq.len()),
        ("pairing: v momenta", v.dp.len()),
    ] {
        if len != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                got: len,
            });
        }
    }
    Ok((0..n).map(|i| u.dq[i] * v.dp[i] - u.dp[i] * v.dq[i]).sum())
}

/// A Hamiltonian on `T*R^n` with its symbolic partial derivatives cached.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    coords: Coordinates,
    h: Expr,
    dh_dq: Vec<Expr>,
    dh_dp: Vec<Expr>,
    time_dependent: bool,
}

impl HamiltonianSystem {
    pub fn new(coords: Coordinates, h: Expr) -> Result<Self> {
        let time = coords.time_name().to_string();
        for v in h.free_vars() {
            if !coords.q.contains(&v) && !coords.p.contains(&v) && v != time {
                return Err(Error::Invalid(format!(
                    "hamiltonian uses undeclared variable `{v}`"
                )));
            }
        }
        let time_dependent = h.depends_on(&time);
        let dh_dq = h.gradient(&coords.q);
        let dh_dp = h.gradient(&coords.p);
        Ok(HamiltonianSystem {
            coords,
            h,
            dh_dq,
            dh_dp,
            time_dependent,
        })
    }

    /// Hamiltonian over canonical names `q1..qn, p1..pn`.
    pub fn canonical(n: usize, h: &str) -> Result<Self> {
        Self::new(Coordinates::canonical(n), crate::expr::parse(h)?)
    }

    pub fn coords(&self) -> &Coordinates {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.n()
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.h
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn dh_dp(&self) -> &[Expr] {
        &self.dh_dp
    }

    pub fn dh_dq(&self) -> &[Expr] {
        &self.dh_dq
    }

    pub fn bind(&self, z: &PhasePoint) -> Result<Bindings> {
        self.coords.check(z)?;
        Ok(self.coords.bind(z))
    }

    pub fn energy(&self, z: &PhasePoint) -> Result<f64> {
        Ok(self.h.eval(&self.bind(z)?)?)
    }

    fn bind_for_flow(&self, z: &PhasePoint) -> Result<Bindings> {
        let mut b = self.bind(z)?;
        if self.time_dependent && z.t.is_none() {
            b.set(self.coords.time_name(), 0.0);
        }
        Ok(b)
    }
}

/// `X_h(z) = (∂h/∂p, −∂h/∂q)`.
pub fn hamiltonian_vector_field(sys: &HamiltonianSystem, z: &PhasePoint) -> Result<Tangent> {
    let b = sys.bind_for_flow(z)?;
    let dq = sys
        .dh_dp
        .iter()
        .map(|e| e.eval(&b))
        .collect::<Result<Vec<_>, _>>()?;
    let dp = sys
        .dh_dq
        .iter()
        .map(|e| e.eval(&b).map(|v| -v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Tangent { dq, dp })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub point: PhasePoint,
}

/// Uniformly sampled curve in phase space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }
}

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: &F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy =
        |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k1))?;
    let k3 = f(t + 0.5 * dt, &axpy(0.5 * dt, &k2))?;
    let k4 = f(t + dt, &axpy(dt, &k3))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| yi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Number of uniform steps covering `[0, t_end]` with step close to `dt`,
/// and the step actually used.
pub fn uniform_steps(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Invalid(format!(
            "step size must be positive, got {dt}"
        )));
    }
    if t_end < 0.0 || !t_end.is_finite() {
        return Err(Error::Invalid(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    if t_end == 0.0 {
        return Ok((0, dt));
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    Ok((n, t_end / n as f64))
}

/// Integrates `X_h` from `z0` over `[t0, t0 + t_end]` with classical RK4.
///
/// The step is adjusted so that an integer number of uniform steps lands
/// exactly on `t_end`. A step that touches a singularity of `h` fails with
/// the underlying domain error.
pub fn flow_reference(
    sys: &HamiltonianSystem,
    z0: &PhasePoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    sys.coords.check(z0)?;
    let (steps, h) = uniform_steps(t_end, dt)?;
    let t0 = z0.t.unwrap_or(0.0);
    let stamp = |t: f64| z0.t.map(|_| t).or(sys.time_dependent.then_some(t));
    let field = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let z = PhasePoint::from_slice(y, Some(t));
        Ok(hamiltonian_vector_field(sys, &z)?.to_vec())
    };
    let mut state = z0.to_vec();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample {
        t: t0,
        point: PhasePoint::from_slice(&state, stamp(t0)),
    });
    for k in 0..steps {
        let t = t0 + h * k as f64;
        state = rk4_step(&field, t, &state, h)?;
        let t_next = t0 + h * (k + 1) as f64;
        samples.push(Sample {
            t: t_next,
            point: PhasePoint::from_slice(&state, stamp(t_next)),
        });
    }
    Ok(Trajectory { dt: h, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn calogero() -> HamiltonianSystem {
        HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)+1/(q1-q2)^2").unwrap()
    }

    #[test]
    fn free_particle_field() {
        let sys = HamiltonianSystem::canonical(1, "p1^2/2").unwrap();
        let v = hamiltonian_vector_field(&sys, &PhasePoint::new(vec![0.0], vec![3.0])).unwrap();
        assert_eq!(v, Tangent::new(vec![3.0], vec![0.0]));
    }

    #[test]
    fn calogero_field_at_rest() {
        let v = hamiltonian_vector_field(
            &calogero(),
            &PhasePoint::new(vec![0.0, 1.0], vec![0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(v.dq, vec![0.0, 0.0]);
        assert_eq!(v.dp, vec![-2.0, 2.0]);
    }

    #[test]
    fn oscillator_field() {
        let sys = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)").unwrap();
        let v = hamiltonian_vector_field(&sys, &PhasePoint::new(vec![1.0], vec![0.0])).unwrap();
        assert_eq!(v.to_vec(), vec![0.0, -1.0]);
    }

    #[test]
    fn field_at_collision_is_domain_error() {
        let err = hamiltonian_vector_field(
            &calogero(),
            &PhasePoint::new(vec![1.0, 1.0], vec![0.0, 0.0]),
        );
        assert!(matches!(err, Err(Error::Expr(_))));
    }

    #[test]
    fn pairing_examples() {
        let u = Tangent::new(vec![1.0], vec![0.0]);
        let v = Tangent::new(vec![0.0], vec![1.0]);
        assert_eq!(symplectic_pairing(&u, &v).unwrap(), 1.0);
        assert_eq!(symplectic_pairing(&u, &u).unwrap(), 0.0);
        let u = Tangent::new(vec![1.0, 0.0], vec![2.0, 0.0]);
        let v = Tangent::new(vec![0.0, 1.0], vec![0.0, 3.0]);
        assert_eq!(symplectic_pairing(&u, &v).unwrap(), 0.0);
        let bad = Tangent::new(vec![1.0], vec![1.0, 2.0]);
        assert!(matches!(
            symplectic_pairing(&bad, &v),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn free_particle_flow_is_exact() {
        let sys = HamiltonianSystem::canonical(1, "p1^2/2").unwrap();
        let traj = flow_reference(&sys, &PhasePoint::new(vec![0.0], vec![1.0]), 1.0, 0.1).unwrap();
        let end = &traj.last().unwrap().point;
        assert!((end.q[0] - 1.0).abs() < 1e-15);
        assert_eq!(end.p[0], 1.0);
        assert_eq!(traj.len(), 11);
    }

    #[test]
    fn oscillator_returns_after_one_period() {
        let sys = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)").unwrap();
        let traj =
            flow_reference(&sys, &PhasePoint::new(vec![1.0], vec![0.0]), 2.0 * PI, 1e-3).unwrap();
        let end = &traj.last().unwrap().point;
        assert!((end.q[0] - 1.0).abs() < 1e-10, "{:?}", end);
        assert!(end.p[0].abs() < 1e-10, "{:?}", end);
    }

    #[test]
    fn calogero_energy_is_conserved_by_reference_flow() {
        let sys = calogero();
        let z0 = PhasePoint::new(vec![0.0, 2.0], vec![1.0, -1.0]);
        let e0 = sys.energy(&z0).unwrap();
        let traj = flow_reference(&sys, &z0, 1.0, 1e-3).unwrap();
        let drift = traj
            .samples
            .iter()
            .map(|s| (sys.energy(&s.point).unwrap() - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-8, "drift {drift}");
    }

    #[test]
    fn zero_duration_gives_single_sample() {
        let sys = calogero();
        let traj = flow_reference(
            &sys,
            &PhasePoint::new(vec![0.0, 2.0], vec![0.0; 2]),
            0.0,
            0.1,
        )
        .unwrap();
        assert_eq!(traj.len(), 1);
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        assert!(HamiltonianSystem::canonical(1, "p1^2 + k*q1").is_err());
        let sys = HamiltonianSystem::canonical(1, "p1^2 + t*q1").unwrap();
        assert!(sys.is_time_dependent());
    }
}
