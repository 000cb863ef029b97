//! Best-effort normalization.
//!
//! Expressions are flattened into sums of terms `c * Π base^k`, like terms
//! are merged and numeric constants folded. A product of two multi-term
//! sums and powers of sums are kept opaque, so the output never grows
//! combinatorially. Term order follows first occurrence in the input.

use super::{BinOp, Expr, Func};

#[derive(Clone, Debug)]
struct Term {
    coef: f64,
    factors: Vec<(Expr, f64)>,
}

impl Term {
    fn constant(c: f64) -> Term {
        Term {
            coef: c,
            factors: Vec::new(),
        }
    }

    fn atom(base: Expr) -> Term {
        Term {
            coef: 1.0,
            factors: vec![(base, 1.0)],
        }
    }
}

impl Expr {
    /// Returns an equivalent, normalized expression.
    ///
    /// Equivalence holds wherever both sides are defined; normalization may
    /// remove removable singularities (`x/x` becomes `1`).
    pub fn simplify(&self) -> Expr {
        to_expr(&sum_of(self))
    }
}

fn sum_of(e: &Expr) -> Vec<Term> {
    match e {
        Expr::Const(c) => {
            if *c == 0.0 {
                Vec::new()
            } else {
                vec![Term::constant(*c)]
            }
        }
        Expr::Var(_) => vec![Term::atom(e.clone())],
        Expr::Neg(a) => negate(sum_of(a)),
        Expr::Binary(op, l, r) => match op {
            BinOp::Add => {
                let mut t = sum_of(l);
                t.extend(sum_of(r));
                collect(t)
            }
            BinOp::Sub => {
                let mut t = sum_of(l);
                t.extend(negate(sum_of(r)));
                collect(t)
            }
            BinOp::Mul => mul_sums(sum_of(l), sum_of(r)),
            BinOp::Div => {
                let num = sum_of(l);
                let den = sum_of(r);
                match den.as_slice() {
                    [] => vec![Term::atom(Expr::Binary(
                        BinOp::Div,
                        Box::new(to_expr(&num)),
                        Box::new(Expr::zero()),
                    ))],
                    [single] => mul_sums(num, vec![invert(single)]),
                    _ => mul_sums(
                        num,
                        vec![Term {
                            coef: 1.0,
                            factors: vec![(to_expr(&den), -1.0)],
                        }],
                    ),
                }
            }
            BinOp::Pow => power(l, r),
        },
        Expr::Call(f, a) => {
            let arg = a.simplify();
            if let Expr::Const(c) = arg {
                if let Ok(v) = f.apply(c) {
                    return sum_of(&Expr::Const(v));
                }
            }
            if *f == Func::Sqrt {
                // sqrt(u) is u^0.5 for the purpose of merging with other powers of u.
                let terms = sum_of(&arg);
                if let [t] = terms.as_slice() {
                    if t.coef > 0.0 && t.factors.len() == 1 && t.factors[0].1 == 1.0 {
                        return vec![Term {
                            coef: t.coef.sqrt(),
                            factors: vec![(t.factors[0].0.clone(), 0.5)],
                        }];
                    }
                }
            }
            vec![Term::atom(Expr::call(*f, arg))]
        }
        Expr::Apply(p, args) => vec![Term::atom(Expr::Apply(
            p.clone(),
            args.iter().map(Expr::simplify).collect(),
        ))],
    }
}

fn power(base: &Expr, exponent: &Expr) -> Vec<Term> {
    let exp = exponent.simplify();
    let Expr::Const(n) = exp else {
        return vec![Term::atom(Expr::Binary(
            BinOp::Pow,
            Box::new(base.simplify()),
            Box::new(exp),
        ))];
    };
    if n == 0.0 {
        return vec![Term::constant(1.0)];
    }
    if n == 1.0 {
        return sum_of(base);
    }
    let terms = sum_of(base);
    let integer = n.fract() == 0.0;
    match terms.as_slice() {
        [] if n > 0.0 => Vec::new(),
        [t] if t.coef != 0.0 && (integer || t.coef > 0.0) => {
            let coef = t.coef.powf(n);
            // Non-integer powers distribute only over factors that are
            // themselves raised to integer powers of a positive quantity;
            // keep it simple and only distribute integer powers.
            if coef.is_finite() && (integer || t.factors.is_empty()) {
                let factors = t.factors.iter().map(|(b, k)| (b.clone(), k * n)).collect();
                return vec![Term { coef, factors }];
            }
            vec![Term {
                coef: 1.0,
                factors: vec![(to_expr(&terms), n)],
            }]
        }
        _ => vec![Term {
            coef: 1.0,
            factors: vec![(to_expr(&terms), n)],
        }],
    }
}

fn negate(mut terms: Vec<Term>) -> Vec<Term> {
    for t in &mut terms {
        t.coef = -t.coef;
    }
    terms
}

fn invert(t: &Term) -> Term {
    Term {
        coef: 1.0 / t.coef,
        factors: t.factors.iter().map(|(b, k)| (b.clone(), -k)).collect(),
    }
}

fn mul_terms(a: &Term, b: &Term) -> Term {
    let mut factors = a.factors.clone();
    factors.extend(b.factors.iter().cloned());
    Term {
        coef: a.coef * b.coef,
        factors: merge_factors(factors),
    }
}

fn merge_factors(factors: Vec<(Expr, f64)>) -> Vec<(Expr, f64)> {
    let mut out: Vec<(Expr, f64)> = Vec::with_capacity(factors.len());
    for (base, k) in factors {
        match out.iter_mut().find(|(b, _)| *b == base) {
            Some(slot) => slot.1 += k,
            None => out.push((base, k)),
        }
    }
    out.retain(|(_, k)| *k != 0.0);
    out.sort_by_cached_key(|(b, _)| b.to_string());
    out
}

fn mul_sums(a: Vec<Term>, b: Vec<Term>) -> Vec<Term> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len() == 1 || b.len() == 1 {
        let mut out = Vec::with_capacity(a.len() * b.len());
        for x in &a {
            for y in &b {
                out.push(mul_terms(x, y));
            }
        }
        return collect(out);
    }
    vec![Term {
        coef: 1.0,
        factors: merge_factors(vec![(to_expr(&a), 1.0), (to_expr(&b), 1.0)]),
    }]
}

fn collect(terms: Vec<Term>) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.iter_mut().find(|o| o.factors == t.factors) {
            Some(o) => o.coef += t.coef,
            None => out.push(t),
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

fn product(parts: Vec<Expr>) -> Option<Expr> {
    parts.into_iter().reduce(|a, b| a * b)
}

fn factor_expr(base: &Expr, k: f64) -> Expr {
    if k == 1.0 {
        base.clone()
    } else if k == 0.5 {
        Expr::call(Func::Sqrt, base.clone())
    } else {
        base.clone().pow(Expr::Const(k))
    }
}

/// Returns the magnitude expression of a term and whether it is negative.
fn term_expr(t: &Term) -> (bool, Expr) {
    let negative = t.coef < 0.0;
    let c = t.coef.abs();
    let num: Vec<Expr> = t
        .factors
        .iter()
        .filter(|(_, k)| *k > 0.0)
        .map(|(b, k)| factor_expr(b, *k))
        .collect();
    let den: Vec<Expr> = t
        .factors
        .iter()
        .filter(|(_, k)| *k < 0.0)
        .map(|(b, k)| factor_expr(b, -k))
        .collect();
    let num = match product(num) {
        None => Expr::Const(c),
        Some(p) if c == 1.0 => p,
        Some(p) => Expr::Const(c) * p,
    };
    let e = match product(den) {
        None => num,
        Some(d) => num / d,
    };
    (negative, e)
}

fn to_expr(terms: &[Term]) -> Expr {
    let mut acc: Option<Expr> = None;
    for t in terms {
        let (neg, e) = term_expr(t);
        acc = Some(match acc {
            None if neg => match e {
                Expr::Const(c) => Expr::Const(-c),
                Expr::Binary(BinOp::Mul, c, rest) if c.as_const().is_some() => {
                    Expr::Const(-c.as_const().unwrap_or_default()) * *rest
                }
                e => -e,
            },
            None => e,
            Some(a) if neg => a - e,
            Some(a) => a + e,
        });
    }
    acc.unwrap_or_else(Expr::zero)
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Bindings};

    fn s(text: &str) -> String {
        parse(text).unwrap().simplify().to_string()
    }

    #[test]
    fn folds_and_collects() {
        assert_eq!(
            s("0.5*(p^2 + (-p)^2) + 1/(0.5*q - -0.5*q)^2"),
            "p^2 + 1/q^2"
        );
        assert_eq!(s("x - x"), "0");
        assert_eq!(s("2*3 + 4"), "10");
        assert_eq!(s("x*y - y*x"), "0");
        assert_eq!(s("0*sin(x) + 1*x^1"), "x");
        assert_eq!(s("-(2*a)"), "-2*a");
        assert_eq!(s("a - 2*b"), "a - 2*b");
        assert_eq!(s("(q1 - q2)^-2"), "1/(q1 - q2)^2");
        assert_eq!(s("sqrt(x)*sqrt(x)"), "x");
        assert_eq!(s("sin(0) + cos(0)"), "1");
    }

    #[test]
    fn products_of_sums_stay_opaque() {
        assert_eq!(s("(a+b)*(c+d)"), "(a + b)*(c + d)");
        assert_eq!(s("(a+b)^3"), "(a + b)^3");
    }

    #[test]
    fn keeps_division_by_literal_zero_singular() {
        let e = parse("x/0").unwrap().simplify();
        assert!(e.eval(&Bindings::new().with("x", 1.0)).is_err());
    }
}
