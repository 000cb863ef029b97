//! Separated solution of the heavy top with phi and psi cyclic.

use hjreduce::hj::{solve_heavy_top, HeavyTop};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let top = HeavyTop {
        i: 1.0,
        j: 1.0,
        m: 1.0,
        g: 1.0,
        l: 1.0,
    };
    let pi = std::f64::consts::PI;
    let sol = solve_heavy_top(&top, 0.3, 0.2, 3.0, (pi / 6.0, 5.0 * pi / 6.0), 2001)?;
    println!("S        = {}", sol.ansatz.template());
    println!("equation : {} = F", sol.ansatz.display_equation());
    println!("min radicand       {:.6}", sol.min_radicand);
    println!("equation residual  {:.3e}", sol.equation_residual);
    println!("hj residual        {:.3e}", sol.completeness.hj_max_dev);
    println!("min |det S_qb|     {:.6}", sol.completeness.min_abs_det);
    for th in [pi / 6.0, pi / 2.0, 5.0 * pi / 6.0] {
        println!("V'({th:.4}) = {:.12}", sol.v.dw(th)?);
    }
    Ok(())
}
