//! Canonical infix printing.
//!
//! Output re-parses to a tree with the same evaluation: parentheses are
//! emitted wherever the parser would otherwise regroup operands.

use std::fmt;

use super::{BinOp, Expr};

const ADD: u8 = 1;
const MUL: u8 = 2;
const UNARY: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => UNARY,
        Expr::Const(_) | Expr::Var(_) | Expr::Call(..) | Expr::Apply(..) => ATOM,
        Expr::Neg(_) => UNARY,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => ADD,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => MUL,
        Expr::Binary(BinOp::Pow, ..) => POW,
    }
}

struct Wrapped<'a>(&'a Expr, bool);

impl fmt::Display for Wrapped<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn wrap(e: &Expr, cond: bool) -> Wrapped<'_> {
    Wrapped(e, cond)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(a) => write!(f, "-{}", wrap(a, prec(a) < UNARY)),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Apply(p, args) => {
                write!(f, "{}(", p.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Binary(op, l, r) => match op {
                BinOp::Add | BinOp::Sub => {
                    write!(f, "{l}")?;
                    let sign = if *op == BinOp::Add { '+' } else { '-' };
                    // `a + -b` reads better as `a - b` and is bit-identical.
                    match (op, r.as_ref()) {
                        (BinOp::Add, Expr::Neg(inner)) => {
                            write!(f, " - {}", wrap(inner, prec(inner) <= ADD))
                        }
                        _ => write!(f, " {sign} {}", wrap(r, prec(r) <= ADD)),
                    }
                }
                BinOp::Mul | BinOp::Div => {
                    let sign = if *op == BinOp::Mul { '*' } else { '/' };
                    write!(
                        f,
                        "{}{sign}{}",
                        wrap(l, prec(l) < MUL),
                        wrap(r, prec(r) <= MUL)
                    )
                }
                BinOp::Pow => write!(
                    f,
                    "{}^{}",
                    wrap(l, prec(l) <= POW),
                    wrap(r, prec(r) < UNARY)
                ),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn minimal_parentheses() {
        for (src, printed) in [
            (
                "0.5*(p1^2+p2^2)+1/(q1-q2)^2",
                "0.5*(p1^2 + p2^2) + 1/(q1 - q2)^2",
            ),
            ("a-(b-c)", "a - (b - c)"),
            ("a-b-c", "a - b - c"),
            ("(-x)^2", "(-x)^2"),
            ("-x^2", "-x^2"),
            ("(x^2)^3", "(x^2)^3"),
            ("x^y^z", "x^y^z"),
            ("x^(-2)", "x^-2"),
            ("a/(b*c)", "a/(b*c)"),
            ("-(a+b)", "-(a + b)"),
            ("a+-b", "a - b"),
        ] {
            assert_eq!(parse(src).unwrap().to_string(), printed, "{src}");
        }
    }
}
