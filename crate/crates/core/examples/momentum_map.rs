//! Cotangent lift, momentum map and the invariance test for lagrangian graphs.

use hjreduce::forms::OneForm;
use hjreduce::grid;
use hjreduce::parse;
use hjreduce::phase_space::HamiltonianSystem;
use hjreduce::phase_space::PhasePoint;
use hjreduce::symmetry::{
    check_invariance_lemma, cotangent_lift, is_invariant, momentum_map, TranslationAction,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = TranslationAction::new(2, &[vec![1.0, 1.0]])?;
    let z = PhasePoint::new(vec![0.3, -0.2], vec![1.0, 2.5]);
    let moved = cotangent_lift(&a, &[0.7], &z)?;
    println!("lift by 0.7:  q = {:?}, p = {:?}", moved.q, moved.p);
    println!(
        "J(z) = {:?}, J(lift) = {:?}",
        momentum_map(&a, &z)?.0,
        momentum_map(&a, &moved)?.0
    );

    let sys = HamiltonianSystem::canonical(2, "0.5*(p1^2+p2^2) + 1/(q1-q2)^2")?;
    let mut rng = grid::rng(grid::DEFAULT_SEED);
    println!(
        "calogero h invariant: {}",
        is_invariant(&a, sys.coords(), sys.hamiltonian(), 200, 1e-9, &mut rng)?
    );
    println!(
        "q1^2 invariant:       {}",
        is_invariant(&a, sys.coords(), &parse("q1^2")?, 200, 1e-9, &mut rng)?
    );

    let pts = grid::tensor(&[(-2.0, 2.0), (-2.0, 2.0)], 11);
    let vars = sys.coords().q.clone();
    for s in ["q1+q2", "(q1-q2)^3 + 0.5*(q1+q2)", "q1^2"] {
        let gamma = OneForm::exact(vars.clone(), parse(s)?);
        let r = check_invariance_lemma(&a, &gamma, &pts, 1e-9)?;
        println!(
            "S = {s:<26} spread {:<8.3e} invariant {:<5} consistent {}",
            r.j_spread, r.invariant, r.consistent
        );
    }
    Ok(())
}
