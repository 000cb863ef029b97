//! Parse, evaluate and differentiate a hamiltonian.

use hjreduce::{parse, Bindings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = parse("0.5*(p1^2+p2^2) + 1/(q1-q2)^2")?;
    let b = Bindings::new()
        .with("q1", 0.0)
        .with("q2", 1.0)
        .with("p1", 1.0)
        .with("p2", 0.0);
    println!("h            = {h}");
    println!("h(0,1,1,0)   = {}", h.eval(&b)?);
    for v in ["q1", "p1", "t"] {
        let d = h.differentiate(v).simplify();
        println!("dh/d{v:<8} = {d}  ->  {}", d.eval(&b)?);
    }

    let bad = Bindings::new()
        .with("q1", 1.0)
        .with("q2", 1.0)
        .with("p1", 0.0)
        .with("p2", 0.0);
    println!("on the diagonal: {}", h.eval(&bad).unwrap_err());
    println!("parse error:     {}", parse("q1+").unwrap_err());
    Ok(())
}
