//! Reduce the two-body Calogero-Moser system by the diagonal translation.

use hjreduce::grid;
use hjreduce::parse;
use hjreduce::phase_space::{Coordinates, HamiltonianSystem};
use hjreduce::reduction::{reduce, QuotientChart};
use hjreduce::symmetry::{MomentumValue, TranslationAction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let coords = Coordinates::new(vec!["q1", "q2"], vec!["p1", "p2"])?;
    let sys = HamiltonianSystem::new(coords, parse("0.5*(p1^2+p2^2) + 1/(q1-q2)^2")?)?;
    let a = TranslationAction::new(2, &[vec![1.0, 1.0]])?;
    let chart = QuotientChart::new(&a, &sys.coords().q, &["q".into()], &["p".into()])?;
    println!(
        "y block {:?}, x block {:?}",
        chart.y_block(),
        chart.x_block()
    );

    let mut rng = grid::rng(grid::DEFAULT_SEED);
    for mu in [0.0, 0.6] {
        let r = reduce(&sys, &chart, &MomentumValue(vec![mu]), &mut rng)?;
        println!("mu = {mu}: h~ = {}", r.hamiltonian());
    }
    Ok(())
}
