//! Magnetic term of a non-flat connection and the shifted closedness test.

use hjreduce::forms::OneForm;
use hjreduce::grid;
use hjreduce::reduction::{magnetic_condition_residual, magnetic_term, QuotientChart};
use hjreduce::symmetry::{MomentumValue, TranslationAction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q: Vec<String> = ["q1", "q2", "q3"].map(String::from).to_vec();
    let a = TranslationAction::new(3, &[vec![0.0, 0.0, 1.0]])?;
    let chart = QuotientChart::new(
        &a,
        &q,
        &["y1".into(), "y2".into()],
        &["py1".into(), "py2".into()],
    )?;
    let mu = MomentumValue(vec![2.0]);
    let alpha = OneForm::parse(&["q1", "q2", "q3"], &["0", "q1", "2"])?;
    let mut rng = grid::rng(grid::DEFAULT_SEED);
    let beta = magnetic_term(&chart, &alpha, &mu, 1e-12, &mut rng)?;
    println!("beta[y1][y2] = {}", beta.entry(0, 1));

    let pts = grid::tensor(&[(-2.0, 2.0), (-2.0, 2.0)], 9);
    for comps in [
        ["2*y1*y2", "-y1 + y1^2 + cos(y2)"],
        ["2*y1*y2", "y1^2 + cos(y2)"],
    ] {
        let g = OneForm::parse(&["y1", "y2"], &comps)?;
        println!(
            "{comps:?}: residual {}",
            magnetic_condition_residual(&g, &beta, &pts)?
        );
    }
    Ok(())
}
