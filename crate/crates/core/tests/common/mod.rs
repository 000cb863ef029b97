//! Helpers shared by the integration tests.
#![allow(dead_code)]

use hjreduce::hj::{GeneratingFunction, Kind};
use hjreduce::{Bindings, Expr};
use rand::Rng;

pub const VARS: [&str; 3] = ["x", "y", "z"];
const FUNCS: [&str; 7] = ["sin", "cos", "tan", "arctan", "sqrt", "exp", "log"];

/// Random infix expression over `x, y, z` with at most `depth` levels.
pub fn random_expr(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) {
            VARS[rng.gen_range(0..3)].to_string()
        } else {
            format!("{:.2}", rng.gen_range(0.1..3.0))
        };
    }
    match rng.gen_range(0..8) {
        0 => format!("-({})", random_expr(rng, depth - 1)),
        1 => format!(
            "{}({})",
            FUNCS[rng.gen_range(0..FUNCS.len())],
            random_expr(rng, depth - 1)
        ),
        2 => format!("({})^{}", random_expr(rng, depth - 1), rng.gen_range(2..4)),
        3 => format!(
            "({})^({})",
            random_expr(rng, depth - 1),
            random_expr(rng, depth - 1)
        ),
        k => {
            let op = ["+", "-", "*", "/"][k - 4];
            format!(
                "({}) {op} ({})",
                random_expr(rng, depth - 1),
                random_expr(rng, depth - 1)
            )
        }
    }
}

pub fn bind(values: &[f64]) -> Bindings {
    let mut b = Bindings::new();
    for (v, x) in VARS.iter().zip(values) {
        b.set(*v, *x);
    }
    b
}

fn shifted(e: &Expr, b: &Bindings, var: &str, dx: f64) -> Option<f64> {
    let mut b = b.clone();
    b.set(var, b.get(var).ok()? + dx);
    e.eval(&b).ok().filter(|v| v.is_finite())
}

/// Fourth-order central difference with step `h`.
pub fn central_difference(e: &Expr, b: &Bindings, var: &str, h: f64) -> Option<f64> {
    let f1 = shifted(e, b, var, h)? - shifted(e, b, var, -h)?;
    let f2 = shifted(e, b, var, 2.0 * h)? - shifted(e, b, var, -2.0 * h)?;
    Some((8.0 * f1 - f2) / (12.0 * h))
}

/// Relative derivative error `|d − fd| / (1 + |fd|)` at `b`, or `None` when
/// the point is singular for the difference oracle (domain errors nearby,
/// huge values, or step-size dependence of the estimate).
pub fn derivative_error(e: &Expr, b: &Bindings, var: &str) -> Option<f64> {
    let f0 = e.eval(b).ok()?;
    if !f0.is_finite() || f0.abs() > 1e6 {
        return None;
    }
    let x = b.get(var).ok()?;
    let h = 1e-3 * (1.0 + x.abs());
    let fd = central_difference(e, b, var, h)?;
    let fd_half = central_difference(e, b, var, h / 2.0)?;
    if !fd.is_finite() || fd.abs() > 1e6 || (fd - fd_half).abs() > 1e-8 * (1.0 + fd.abs()) {
        return None;
    }
    let d = e.differentiate(var).eval(b).ok()?;
    Some((d - fd).abs() / (1.0 + fd.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `S = qᵀβ + τ P(q, β)` with `P` a random cubic; small `τ` keeps the mixed
/// Hessian close to the identity.
pub fn random_generator(rng: &mut impl Rng, n: usize) -> GeneratingFunction {
    let q: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    let b: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let vars: Vec<&String> = q.iter().chain(&b).collect();
    let mut terms = Vec::new();
    for i in 0..vars.len() {
        for j in i..vars.len() {
            let c = rng.gen_range(-1.0..1.0);
            terms.push(format!("{c}*{}*{}", vars[i], vars[j]));
        }
        let c = rng.gen_range(-0.3..0.3);
        terms.push(format!("{c}*{}^3", vars[i]));
        let c = rng.gen_range(-0.5..0.5);
        terms.push(format!("{c}*sin({})", vars[i]));
    }
    let linear: Vec<String> = q.iter().zip(&b).map(|(x, y)| format!("{x}*{y}")).collect();
    let text = format!("{} + 0.1*({})", linear.join(" + "), terms.join(" + "));
    let qs: Vec<&str> = q.iter().map(String::as_str).collect();
    let bs: Vec<&str> = b.iter().map(String::as_str).collect();
    GeneratingFunction::parse(Kind::TypeII, &text, &qs, &bs).unwrap()
}
