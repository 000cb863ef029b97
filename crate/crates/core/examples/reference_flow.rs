//! RK4 reference flow of the harmonic oscillator, written as CSV on stdout.

use hjreduce::cli::trajectory_csv;
use hjreduce::phase_space::{flow_reference, HamiltonianSystem, PhasePoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)")?;
    let traj = flow_reference(
        &sys,
        &PhasePoint::new(vec![1.0], vec![0.0]),
        std::f64::consts::TAU,
        0.5,
    )?;
    print!(
        "{}",
        trajectory_csv(&traj, &sys.coords().q, &sys.coords().p)
    );

    let e0 = sys.energy(&traj.samples[0].point)?;
    let drift = traj
        .samples
        .iter()
        .map(|s| (sys.energy(&s.point).unwrap() - e0).abs())
        .fold(0.0, f64::max);
    eprintln!("{} samples, energy drift {drift:.3e}", traj.len());
    Ok(())
}
