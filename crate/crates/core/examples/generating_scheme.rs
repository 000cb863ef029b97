//! First-order generating-function scheme S = q.b + tau*h(q, b): one step of
//! the oscillator by hand, then momentum conservation on Calogero-Moser.

use hjreduce::grid;
use hjreduce::integrators::{
    euler_generator, momentum_drift_unchecked, momentum_preservation_check, run_scheme,
    symplecticity_defect, ImplicitMap,
};
use hjreduce::phase_space::{HamiltonianSystem, PhasePoint};
use hjreduce::symmetry::TranslationAction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let osc = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)")?;
    let mut map = ImplicitMap::new(euler_generator(&osc, 0.1)?);
    let z = PhasePoint::new(vec![1.0], vec![0.0]);
    println!("one step from (1, 0): {:?}", map.apply(&z, 0.0)?.to_vec());
    let m = map.jacobian(&z, 0.0)?;
    println!("jacobian {m:.4}defect {:.3e}", symplecticity_defect(&m));

    let a = TranslationAction::new(2, &[vec![1.0, 1.0]])?;
    let z0 = PhasePoint::new(vec![1.5, -0.5], vec![0.4, -0.1]);
    let cm = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2) + 1/(q1-q2)^2")?;
    let (_, report) = run_scheme(&cm, &a, 0.01, &z0, 1000)?;
    println!(
        "calogero: momentum drift {:.3e}, energy drift {:.3e}",
        report.max_momentum_drift, report.max_energy_drift
    );

    let ctl = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2) + 1/(q1-q2)^2 + 0.5*q1^2")?;
    let s = euler_generator(&ctl, 0.01)?;
    let mut rng = grid::rng(grid::DEFAULT_SEED);
    match momentum_preservation_check(&s, &a, &z0, 1000, &mut rng) {
        Ok(d) => println!("control unexpectedly accepted, drift {d:.3e}"),
        Err(e) => println!("control rejected: {e}"),
    }
    println!(
        "control drift without the check {:.3e}",
        momentum_drift_unchecked(&s, &a, &z0, 1000)?
    );
    Ok(())
}
