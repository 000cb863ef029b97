//! Lifting reduced Hamilton-Jacobi solutions back to `T*Q` and rebuilding
//! full trajectories from reduced ones.
//!
//! A reduced solution `γ̃` on `Q/G` lifts to `γ = π*γ̃ + α_μ`. With the flat
//! connection, a curve `c(t)` in `Q/G` has horizontal lift
//! `d(t) = T⁻¹(c(t), 0)` and the full curve is `d(t) + G g(t)`, where the
//! group part solves `ġ = A(X_h^γ(d) − ḋ)`.

use serde::Serialize;

use crate::error::{witness, Error, Result};
use crate::expr::{self, Expr};
use crate::forms::OneForm;
use crate::grid::{self, SampleRng};
use crate::hj::{hj_residual, HjResidual};
use crate::phase_space::{
    flow_reference, rk4_step, uniform_steps, HamiltonianSystem, PhasePoint, Sample, Trajectory,
};
use crate::reduction::{located, QuotientChart, ReducedSystem};
use crate::symmetry::{covector_momentum, MomentumValue};

/// Group elements sampled per grid point for the invariance residual.
const GROUP_SAMPLES: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    /// `max |γ(q + G g) − γ(q)|` over the grid and sampled `g`.
    pub invariance_residual: f64,
    /// `max |J∘γ − μ|` over the grid.
    pub momentum_residual: f64,
    pub hj: HjResidual,
}

impl ReconstructionReport {
    pub fn is_finite(&self) -> bool {
        self.invariance_residual.is_finite()
            && self.momentum_residual.is_finite()
            && self.hj.max_dev.is_finite()
    }
}

/// `γ = π*γ̃ + α_μ`, with `α_μ` the flat connection form when `alpha` is
/// `None`.
///
/// When both `γ̃` and `α_μ` carry potentials, so does the lift:
/// `W(q) = W̃(y(q)) + (potential of α_μ)`.
pub fn lift_solution(
    gamma_tilde: &OneForm,
    chart: &QuotientChart,
    mu: &MomentumValue,
    alpha: Option<&OneForm>,
) -> Result<OneForm> {
    if gamma_tilde.vars() != chart.y_names() {
        return Err(Error::Dimension {
            what: "reduced one-form",
            expected: chart.m(),
            got: gamma_tilde.dim(),
        });
    }
    let flat;
    let alpha = match alpha {
        Some(a) => a,
        None => {
            flat = chart.flat_alpha(mu)?;
            &flat
        }
    };
    if alpha.vars() != chart.q_names() {
        return Err(Error::Invalid(
            "connection form is not written in the chart's configuration coordinates".into(),
        ));
    }
    let y_of_q = chart.y_in_q();
    let pulled = gamma_tilde.substitute(&y_of_q);
    let t = chart.matrix();
    let components = (0..chart.n())
        .map(|i| {
            let terms = (0..chart.m())
                .filter(|&r| t[(r, i)] != 0.0)
                .map(|r| Expr::Const(t[(r, i)]) * pulled[r].clone())
                .chain(std::iter::once(alpha.components()[i].clone()));
            expr::sum(terms).simplify()
        })
        .collect();
    let potential = match (gamma_tilde.potential(), alpha.potential()) {
        (Some(w), Some(a)) => Some((w.substitute(&y_of_q) + a.clone()).simplify()),
        _ => None,
    };
    Ok(OneForm::new(chart.q_names().to_vec(), components)?.with_potential(potential))
}

/// `X_h^γ(q) = ∂h/∂p (q, γ(q))`.
pub fn projected_vector_field(
    sys: &HamiltonianSystem,
    gamma: &OneForm,
    q: &[f64],
) -> Result<Vec<f64>> {
    let coords = sys.coords();
    if gamma.vars() != coords.q.as_slice() {
        return Err(Error::Invalid(
            "one-form is not written in the system's configuration coordinates".into(),
        ));
    }
    let mut b = gamma.bind(q)?;
    let p = gamma.eval_with(&b).map_err(|e| located(e, &coords.q, q))?;
    b.assign(&coords.p, &p);
    if let Some(t) = &coords.t {
        if !b.contains(t) {
            b.set(t.clone(), 0.0);
        }
    }
    sys.dh_dp()
        .iter()
        .map(|e| e.eval(&b).map_err(|e| Error::at(e, &coords.q, q)))
        .collect()
}

/// Point `(q, γ(q))` of `Im γ`.
pub fn graph_point(gamma: &OneForm, q: &[f64]) -> Result<PhasePoint> {
    Ok(PhasePoint::new(q.to_vec(), gamma.eval(q)?))
}

/// Integrates `X_h^γ` on `Q` from `q0` with RK4 and returns the curve on
/// `Im γ` (positions and `p = γ(q)`).
pub fn integrate_projected(
    sys: &HamiltonianSystem,
    gamma: &OneForm,
    q0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let (steps, h) = uniform_steps(t_end, dt)?;
    let field = |_t: f64, q: &[f64]| projected_vector_field(sys, gamma, q);
    let mut q = q0.to_vec();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample {
        t: 0.0,
        point: graph_point(gamma, &q)?,
    });
    for k in 0..steps {
        q = rk4_step(&field, h * k as f64, &q, h)?;
        samples.push(Sample {
            t: h * (k + 1) as f64,
            point: graph_point(gamma, &q)?,
        });
    }
    Ok(Trajectory { dt: h, samples })
}

/// Reconstructs the full curve from the reduced one.
///
/// The reduced base curve `c(t)` follows `ċ = ∂h̃/∂p_y (c, γ̃(c))`, starting
/// at `y0`. The group coordinate starts at zero and is integrated together
/// with `c` in the same RK4 step, which for the `c`-only right-hand side of
/// the connection equation is Simpson's rule on each step. Returned samples
/// carry `p = γ(q)` for the lifted `γ`.
pub fn reconstruct_trajectory(
    sys: &HamiltonianSystem,
    reduced: &ReducedSystem,
    gamma_tilde: &OneForm,
    y0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let chart = &reduced.chart;
    let (m, k) = (chart.m(), chart.k());
    if y0.len() != m {
        return Err(Error::Dimension {
            what: "reduced base point",
            expected: m,
            got: y0.len(),
        });
    }
    let gamma = lift_solution(gamma_tilde, chart, &reduced.mu, None)?;
    let x_block = chart.x_block();
    let zero_x = vec![0.0; k];
    let field = |_t: f64, state: &[f64]| -> Result<Vec<f64>> {
        let c = &state[..m];
        let dc = projected_vector_field(&reduced.system, gamma_tilde, c)?;
        let d = chart.join(c, &zero_x)?;
        let dd = chart.join(&dc, &zero_x)?;
        let x = projected_vector_field(sys, &gamma, &d)?;
        let rel: Vec<f64> = x.iter().zip(&dd).map(|(a, b)| a - b).collect();
        let dg = x_block
            .iter()
            .map(|row| row.iter().zip(&rel).map(|(a, b)| a * b).sum::<f64>());
        Ok(dc.into_iter().chain(dg).collect())
    };
    let g_matrix = chart.action().matrix();
    let assemble = |state: &[f64]| -> Result<PhasePoint> {
        let mut q = chart.join(&state[..m], &zero_x)?;
        for (i, qi) in q.iter_mut().enumerate() {
            *qi += (0..k).map(|a| g_matrix[(i, a)] * state[m + a]).sum::<f64>();
        }
        graph_point(&gamma, &q)
    };
    let (steps, h) = uniform_steps(t_end, dt)?;
    let mut state: Vec<f64> = y0.iter().copied().chain(zero_x.iter().copied()).collect();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample {
        t: 0.0,
        point: assemble(&state)?,
    });
    for s in 0..steps {
        state = rk4_step(&field, h * s as f64, &state, h)?;
        samples.push(Sample {
            t: h * (s + 1) as f64,
            point: assemble(&state)?,
        });
    }
    Ok(Trajectory { dt: h, samples })
}

/// Sup-norm distance between two trajectories sampled at the same times.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, positions_only: bool) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "trajectory samples",
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut worst = 0.0f64;
    for (u, v) in a.samples.iter().zip(&b.samples) {
        if (u.t - v.t).abs() > 1e-12 * (1.0 + u.t.abs()) {
            return Err(Error::Invalid(format!(
                "sample times differ: {} vs {}",
                u.t, v.t
            )));
        }
        let (x, y) = if positions_only {
            (u.point.q.clone(), v.point.q.clone())
        } else {
            (u.point.to_vec(), v.point.to_vec())
        };
        worst = x
            .iter()
            .zip(&y)
            .fold(worst, |w, (p, q)| w.max((p - q).abs()));
    }
    Ok(worst)
}

/// `sup_t ‖γ(c(t)) − z(t)‖∞` where `c` integrates `X_h^γ` from `q0` and `z`
/// integrates `X_h` from `γ(q0)`.
pub fn gamma_relatedness(
    sys: &HamiltonianSystem,
    gamma: &OneForm,
    q0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<f64> {
    let base = integrate_projected(sys, gamma, q0, t_end, dt)?;
    let full = flow_reference(sys, &graph_point(gamma, q0)?, t_end, dt)?;
    trajectory_distance(&base, &full, false)
}

/// Largest change of `J` along a trajectory.
pub fn momentum_variation(chart: &QuotientChart, traj: &Trajectory) -> Result<f64> {
    let Some(first) = traj.samples.first() else {
        return Ok(0.0);
    };
    let j0 = covector_momentum(chart.action(), &first.point.p)?;
    let mut worst = 0.0f64;
    for s in &traj.samples {
        let j = covector_momentum(chart.action(), &s.point.p)?;
        worst =
            j.0.iter()
                .zip(&j0.0)
                .fold(worst, |w, (a, b)| w.max((a - b).abs()));
    }
    Ok(worst)
}

/// Checks a lifted solution on a grid of points of `Q`: invariance (with
/// group elements drawn from `rng`), the momentum level and the full HJ
/// residual.
pub fn verify_lift(
    sys: &HamiltonianSystem,
    gamma: &OneForm,
    chart: &QuotientChart,
    mu: &MomentumValue,
    grid_points: &[Vec<f64>],
    rng: &mut SampleRng,
) -> Result<ReconstructionReport> {
    let a = chart.action();
    let mut invariance_residual = 0.0f64;
    let mut momentum_residual = 0.0f64;
    for q in grid_points {
        let at = |e: Error| located(e, chart.q_names(), q);
        let v0 = gamma.eval(q).map_err(at)?;
        let j = covector_momentum(a, &v0)?;
        momentum_residual =
            j.0.iter()
                .zip(&mu.0)
                .fold(momentum_residual, |w, (x, m)| w.max((x - m).abs()));
        for _ in 0..if a.k() > 0 { GROUP_SAMPLES } else { 0 } {
            let g = grid::uniform_point(rng, a.k(), -2.0, 2.0);
            let moved = a.act(&g, q)?;
            let v1 = gamma
                .eval(&moved)
                .map_err(|e| located(e, chart.q_names(), &moved))?;
            invariance_residual = v0
                .iter()
                .zip(&v1)
                .fold(invariance_residual, |w, (x, y)| w.max((x - y).abs()));
        }
    }
    let hj = hj_residual(sys, gamma, grid_points)?;
    let report = ReconstructionReport {
        invariance_residual,
        momentum_residual,
        hj,
    };
    if !report.is_finite() {
        let q = grid_points.first().cloned().unwrap_or_default();
        return Err(Error::Precondition {
            what: "non-finite reconstruction residual".into(),
            residual: f64::NAN,
            witness: witness(chart.q_names(), &q),
        });
    }
    Ok(report)
}

/// Grid of `Q` built from a product grid in chart coordinates `(y, x)`.
pub fn chart_grid(
    chart: &QuotientChart,
    y_ranges: &[(f64, f64)],
    x_ranges: &[(f64, f64)],
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    if y_ranges.len() != chart.m() || x_ranges.len() != chart.k() {
        return Err(Error::Dimension {
            what: "chart grid ranges",
            expected: chart.n(),
            got: y_ranges.len() + x_ranges.len(),
        });
    }
    let ranges: Vec<(f64, f64)> = y_ranges.iter().chain(x_ranges).copied().collect();
    grid::tensor(&ranges, n)
        .into_iter()
        .map(|p| chart.join(&p[..chart.m()], &p[chart.m()..]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::hj::{solve_reduced_1d, BranchSign};
    use crate::reduction::{build_chart, project_lagrangian, reduce};
    use crate::symmetry::TranslationAction;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn calogero() -> (HamiltonianSystem, QuotientChart) {
        let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)+1/(q1-q2)^2").unwrap();
        let a = TranslationAction::new(2, &[vec![1.0, 1.0]]).unwrap();
        (sys, build_chart(&a, &names(&["q1", "q2"])).unwrap())
    }

    #[test]
    fn calogero_lift_is_difference_form() {
        let (sys, chart) = calogero();
        let mu = MomentumValue(vec![0.0]);
        let h = parse("py^2 + 1/y^2").unwrap();
        let sol =
            solve_reduced_1d(&h, "y", "py", 2.0, (0.8, 5.0), BranchSign::Positive, 801).unwrap();
        let gamma = lift_solution(&sol.form, &chart, &mu, None).unwrap();
        let v = gamma.eval(&[3.0, 0.0]).unwrap();
        let w3 = (2.0 - 1.0 / 9.0f64).sqrt();
        assert!((v[0] - w3).abs() < 1e-13 && (v[1] + w3).abs() < 1e-13);
        let x = projected_vector_field(&sys, &gamma, &[3.0, 0.0]).unwrap();
        assert!((x[0] - w3).abs() < 1e-13 && (x[1] + w3).abs() < 1e-13);
        let pts = chart_grid(&chart, &[(1.0, 5.0)], &[(-2.0, 2.0)], 7).unwrap();
        let r = verify_lift(&sys, &gamma, &chart, &mu, &pts, &mut grid::rng(42)).unwrap();
        assert!(r.hj.max_dev < 1e-10);
        assert!((r.hj.e_est - 2.0).abs() < 1e-10);
        assert!(r.momentum_residual < 1e-12);
        assert!(r.invariance_residual < 1e-13);
    }

    #[test]
    fn pure_connection_part() {
        let a = TranslationAction::new(2, &[vec![1.0, 0.0]]).unwrap();
        let chart = build_chart(&a, &names(&["q1", "q2"])).unwrap();
        let zero = OneForm::zero(chart.y_names().to_vec());
        let mu = MomentumValue(vec![1.5]);
        let g = lift_solution(&zero, &chart, &mu, None).unwrap();
        assert_eq!(g.eval(&[0.3, -2.0]).unwrap(), vec![1.5, 0.0]);
        assert_eq!(
            covector_momentum(&a, &g.eval(&[1.0, 1.0]).unwrap())
                .unwrap()
                .0,
            vec![1.5]
        );
    }

    #[test]
    fn lift_then_project_is_identity() {
        let a = TranslationAction::new(3, &[vec![1.0, 1.0, 0.0]]).unwrap();
        let chart = build_chart(&a, &names(&["q1", "q2", "q3"])).unwrap();
        let mu = MomentumValue(vec![0.7]);
        let gt = OneForm::exact(
            chart.y_names().to_vec(),
            parse("sin(y1)*y2 + y2^3/3").unwrap(),
        );
        let gamma = lift_solution(&gt, &chart, &mu, None).unwrap();
        let mut rng = grid::rng(3);
        let pts = grid::tensor(&[(-1.0, 1.0), (-1.0, 1.0)], 4);
        let (back, report) =
            project_lagrangian(&gamma, &chart, &mu, None, &pts, 1e-9, &mut rng).unwrap();
        assert!(report.magnetic_residual < 1e-12);
        for _ in 0..20 {
            let y = grid::uniform_point(&mut rng, 2, -2.0, 2.0);
            let (u, v) = (gt.eval(&y).unwrap(), back.eval(&y).unwrap());
            assert!(u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12));
        }
    }

    #[test]
    fn free_particle_vector_fields() {
        let sys = HamiltonianSystem::canonical(1, "p1^2/2").unwrap();
        let g = OneForm::exact(names(&["q1"]), parse("q1^2/2").unwrap());
        assert_eq!(projected_vector_field(&sys, &g, &[1.0]).unwrap(), vec![1.0]);
        let sys2 = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)").unwrap();
        let z = OneForm::zero(names(&["q1", "q2"]));
        assert_eq!(
            projected_vector_field(&sys2, &z, &[4.0, -1.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn free_particle_reconstruction_is_linear() {
        let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)").unwrap();
        let a = TranslationAction::new(2, &[vec![1.0, 0.0]]).unwrap();
        let chart = build_chart(&a, &names(&["q1", "q2"])).unwrap();
        let (m, c) = (0.8, -0.3);
        let reduced = reduce(&sys, &chart, &MomentumValue(vec![m]), &mut grid::rng(42)).unwrap();
        let gt = OneForm::new(chart.y_names().to_vec(), vec![Expr::Const(c)]).unwrap();
        let traj = reconstruct_trajectory(&sys, &reduced, &gt, &[0.5], 1.0, 0.1).unwrap();
        for s in &traj.samples {
            assert!((s.point.q[0] - m * s.t).abs() < 1e-14);
            assert!((s.point.q[1] - (0.5 + c * s.t)).abs() < 1e-14);
            assert_eq!(s.point.p, vec![m, c]);
        }
    }

    #[test]
    fn stationary_when_reduced_field_vanishes() {
        let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2)").unwrap();
        let a = TranslationAction::new(2, &[vec![1.0, 0.0]]).unwrap();
        let chart = build_chart(&a, &names(&["q1", "q2"])).unwrap();
        let reduced = reduce(&sys, &chart, &MomentumValue(vec![0.0]), &mut grid::rng(42)).unwrap();
        let gt = OneForm::zero(chart.y_names().to_vec());
        let traj = reconstruct_trajectory(&sys, &reduced, &gt, &[1.25], 0.5, 0.1).unwrap();
        assert!(traj.samples.iter().all(|s| s.point.q == vec![0.0, 1.25]));
    }

    #[test]
    fn dimension_mismatch() {
        let (_, chart) = calogero();
        let bad = OneForm::zero(names(&["q1", "q2"]));
        let r = lift_solution(&bad, &chart, &MomentumValue(vec![0.0]), None);
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }
}
