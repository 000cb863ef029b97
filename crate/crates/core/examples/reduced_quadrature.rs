//! Quadrature solution of the reduced equation p^2 + 1/q^2 = 2.

use hjreduce::hj::{solve_reduced_1d, BranchSign};
use hjreduce::parse;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = parse("p^2 + 1/q^2")?;
    let sol = solve_reduced_1d(&h, "q", "p", 2.0, (0.8, 5.0), BranchSign::Positive, 2001)?;
    println!("node residual {:.3e}", sol.node_residual);
    println!(
        "{:>6} {:>20} {:>20} {:>20}",
        "q", "W", "W'", "sqrt(2-1/q^2)"
    );
    for q in [0.8, 1.0, 2.0, 3.5, 5.0] {
        println!(
            "{q:>6} {:>20.15} {:>20.15} {:>20.15}",
            sol.w(q)?,
            sol.dw(q)?,
            (2.0 - 1.0 / (q * q)).sqrt()
        );
    }
    match solve_reduced_1d(&h, "q", "p", 2.0, (0.5, 5.0), BranchSign::Positive, 201) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("range through the turning point: {e}"),
    }
    Ok(())
}
