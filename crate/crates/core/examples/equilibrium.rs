//! Transformation to equilibrium with a closed-form and a quadrature-built
//! complete solution.

use hjreduce::hj::{quadrature_complete_solution, BranchSign, GeneratingFunction, Kind};
use hjreduce::integrators::transform_to_equilibrium;
use hjreduce::phase_space::{HamiltonianSystem, PhasePoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let free = HamiltonianSystem::canonical(1, "0.5*p1^2")?;
    let s = GeneratingFunction::parse(Kind::TypeI, "q1*a - t*a^2/2", &["q1"], &["a"])?;
    let z0 = PhasePoint::new(vec![2.0], vec![3.0]);
    let series = transform_to_equilibrium(&s, &free, &z0, 1.0, 0.01)?;
    println!(
        "free particle: alpha {:?} beta {:?} variation {:.3e}",
        series.alpha[0], series.beta[0], series.max_var
    );

    let osc = HamiltonianSystem::canonical(1, "0.5*(p1^2+q1^2)")?;
    let s = quadrature_complete_solution(
        osc.hamiltonian(),
        "q1",
        "p1",
        "E",
        BranchSign::Positive,
        0.0,
        256,
    )?;
    let z0 = PhasePoint::new(vec![-0.5], vec![1.0]);
    let series = transform_to_equilibrium(&s, &osc, &z0, 1.0, 0.01)?;
    println!("oscillator:    S = {}", s.expr());
    println!(
        "               E {:?} beta {:?} variation {:.3e}",
        series.alpha[0], series.beta[0], series.max_var
    );
    Ok(())
}
