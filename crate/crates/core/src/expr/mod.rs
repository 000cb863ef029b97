//! Scalar expressions over named variables.
//!
//! An [`Expr`] is an immutable tree that can be parsed from infix text,
//! evaluated against [`Bindings`], differentiated symbolically and
//! substituted into. Besides the usual arithmetic and elementary functions
//! the tree admits opaque [`Primitive`] applications; these carry numeric
//! objects such as tabulated antiderivatives and know how to produce their
//! own partial derivatives, which keeps differentiation closed.
//!
//! Singular points never evaluate to `NaN`: division by a denominator of
//! magnitude below [`SINGULAR_EPS`], roots of negative numbers, logarithms
//! of non-positive numbers and non-finite intermediate values all surface
//! as [`ExprError::Domain`].

mod parse;
mod print;
mod simplify;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops;
use std::sync::Arc;

pub use parse::parse;

/// Denominators (and bases raised to negative powers) smaller than this are
/// treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
}

impl ExprError {
    pub(crate) fn domain(expr: impl fmt::Display, reason: impl Into<String>) -> Self {
        ExprError::Domain {
            expr: expr.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Arctan,
    Sqrt,
    Exp,
    Log,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Arctan,
        Func::Sqrt,
        Func::Exp,
        Func::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Arctan => "arctan",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Applies the function, returning `Err(reason)` outside its domain.
    pub fn apply(self, x: f64) -> Result<f64, &'static str> {
        let v = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => {
                if x.cos().abs() < SINGULAR_EPS {
                    return Err("tan at a pole");
                }
                x.tan()
            }
            Func::Arctan => x.atan(),
            Func::Sqrt => {
                if x < 0.0 {
                    return Err("sqrt of a negative number");
                }
                x.sqrt()
            }
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err("log of a non-positive number");
                }
                x.ln()
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err("non-finite result")
        }
    }
}

/// A numeric function embedded in an expression tree.
///
/// Implementations must be pure. `partial(i)` returns the derivative with
/// respect to the `i`-th argument as another primitive of the same arity.
pub trait Primitive: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn arity(&self) -> usize;
    fn eval(&self, args: &[f64]) -> Result<f64, ExprError>;
    fn partial(&self, index: usize) -> Arc<dyn Primitive>;
}

#[derive(Clone)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Apply(Arc<dyn Primitive>, Vec<Expr>),
}

/// Variable assignment used for evaluation. Looking up an unbound name is
/// an error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(HashMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64, ExprError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| ExprError::Unbound(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    /// Binds `names[i]` to `values[i]`.
    pub fn assign(&mut self, names: &[String], values: &[f64]) {
        for (n, v) in names.iter().zip(values) {
            self.0.insert(n.clone(), *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Bindings(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Binary(BinOp::Pow, Box::new(self), Box::new(exponent))
    }

    pub fn powi(self, n: i32) -> Expr {
        self.pow(Expr::Const(n as f64))
    }

    pub fn apply(p: Arc<dyn Primitive>, args: Vec<Expr>) -> Expr {
        debug_assert_eq!(p.arity(), args.len());
        Expr::Apply(p, args)
    }

    fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => b.get(name)?,
            Expr::Neg(a) => -a.eval(b)?,
            Expr::Binary(op, l, r) => {
                let x = l.eval(b)?;
                let y = r.eval(b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.abs() < SINGULAR_EPS {
                            return Err(ExprError::domain(self, "division by zero"));
                        }
                        x / y
                    }
                    BinOp::Pow => pow_checked(x, y).map_err(|r| ExprError::domain(self, r))?,
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(b)?;
                f.apply(x).map_err(|r| ExprError::domain(self, r))?
            }
            Expr::Apply(p, args) => {
                let xs = args
                    .iter()
                    .map(|a| a.eval(b))
                    .collect::<Result<Vec<_>, _>>()?;
                p.eval(&xs)?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::domain(self, "non-finite result"))
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Apply(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
            Expr::Apply(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Replaces every occurrence of the mapped variables. No simplification.
    pub fn substitute(&self, map: &HashMap<String, Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(map))),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.substitute(map), r.substitute(map)),
            Expr::Call(f, a) => Expr::call(*f, a.substitute(map)),
            Expr::Apply(p, args) => {
                Expr::Apply(p.clone(), args.iter().map(|a| a.substitute(map)).collect())
            }
        }
    }

    /// Substitutes numeric values for some variables and simplifies.
    pub fn fix(&self, values: &[(&str, f64)]) -> Expr {
        let map = values
            .iter()
            .map(|(n, v)| (n.to_string(), Expr::Const(*v)))
            .collect();
        self.substitute(&map).simplify()
    }

    /// Symbolic derivative with respect to `var`, simplified.
    pub fn differentiate(&self, var: &str) -> Expr {
        self.diff_raw(var).simplify()
    }

    fn diff_raw(&self, var: &str) -> Expr {
        if !self.depends_on(var) {
            return Expr::zero();
        }
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(_) => Expr::one(),
            Expr::Neg(a) => -a.diff_raw(var),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.as_ref(), r.as_ref());
                match op {
                    BinOp::Add => a.diff_raw(var) + b.diff_raw(var),
                    BinOp::Sub => a.diff_raw(var) - b.diff_raw(var),
                    BinOp::Mul => a.diff_raw(var) * b.clone() + a.clone() * b.diff_raw(var),
                    BinOp::Div => {
                        (a.diff_raw(var) * b.clone() - a.clone() * b.diff_raw(var))
                            / b.clone().powi(2)
                    }
                    BinOp::Pow => {
                        if !b.depends_on(var) {
                            b.clone() * a.clone().pow(b.clone() - Expr::one()) * a.diff_raw(var)
                        } else if !a.depends_on(var) {
                            self.clone() * Expr::call(Func::Log, a.clone()) * b.diff_raw(var)
                        } else {
                            self.clone()
                                * (b.diff_raw(var) * Expr::call(Func::Log, a.clone())
                                    + b.clone() * a.diff_raw(var) / a.clone())
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let a = a.as_ref().clone();
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a.clone()),
                    Func::Cos => -Expr::call(Func::Sin, a.clone()),
                    Func::Tan => Expr::one() + Expr::call(Func::Tan, a.clone()).powi(2),
                    Func::Arctan => Expr::one() / (Expr::one() + a.clone().powi(2)),
                    Func::Sqrt => Expr::Const(0.5) / Expr::call(Func::Sqrt, a.clone()),
                    Func::Exp => Expr::call(Func::Exp, a.clone()),
                    Func::Log => Expr::one() / a.clone(),
                };
                outer * a.diff_raw(var)
            }
            Expr::Apply(p, args) => {
                let mut acc: Option<Expr> = None;
                for (i, arg) in args.iter().enumerate() {
                    if !arg.depends_on(var) {
                        continue;
                    }
                    let term = Expr::Apply(p.partial(i), args.clone()) * arg.diff_raw(var);
                    acc = Some(match acc {
                        None => term,
                        Some(s) => s + term,
                    });
                }
                acc.unwrap_or_else(Expr::zero)
            }
        }
    }

    /// Gradient with respect to the listed variables.
    pub fn gradient(&self, vars: &[String]) -> Vec<Expr> {
        vars.iter().map(|v| self.differentiate(v)).collect()
    }
}

fn pow_checked(x: f64, y: f64) -> Result<f64, &'static str> {
    if y.fract() == 0.0 {
        if y < 0.0 && x.abs() < SINGULAR_EPS {
            return Err("negative power of zero");
        }
        if y.abs() <= i32::MAX as f64 {
            return Ok(x.powi(y as i32));
        }
        return Ok(x.powf(y));
    }
    if x < 0.0 {
        return Err("fractional power of a negative number");
    }
    if y < 0.0 && x < SINGULAR_EPS {
        return Err("negative power of zero");
    }
    Ok(x.powf(y))
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a == b,
            (Expr::Var(a), Expr::Var(b)) => a == b,
            (Expr::Neg(a), Expr::Neg(b)) => a == b,
            (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
                o1 == o2 && l1 == l2 && r1 == r2
            }
            (Expr::Call(f1, a1), Expr::Call(f2, a2)) => f1 == f2 && a1 == a2,
            (Expr::Apply(p1, a1), Expr::Apply(p2, a2)) => {
                std::ptr::eq(Arc::as_ptr(p1) as *const (), Arc::as_ptr(p2) as *const ()) && a1 == a2
            }
            _ => false,
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Expressions serialize as their canonical printed form.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::Const(rhs))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::Const(self), rhs)
            }
        }
    };
}

impl_binop!(Add, add, BinOp::Add);
impl_binop!(Sub, sub, BinOp::Sub);
impl_binop!(Mul, mul, BinOp::Mul);
impl_binop!(Div, div, BinOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Sum of expressions; `0` when empty.
pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
    terms
        .into_iter()
        .reduce(|a, b| a + b)
        .unwrap_or_else(Expr::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, b: &Bindings) -> Result<f64, ExprError> {
        parse(text).unwrap().eval(b)
    }

    #[test]
    fn calogero_hamiltonian_by_hand() {
        let b = Bindings::new()
            .with("q1", 0.0)
            .with("q2", 1.0)
            .with("p1", 1.0)
            .with("p2", 0.0);
        let v = ev("0.5*(p1^2+p2^2)+1/(q1-q2)^2", &b).unwrap();
        assert_eq!(v, 1.5);
    }

    #[test]
    fn constant_and_sqrt() {
        assert_eq!(ev("0", &Bindings::new()).unwrap(), 0.0);
        let b = Bindings::new().with("E", 2.0).with("q", 2.0);
        let v = ev("sqrt(E - 1/q^2)", &b).unwrap();
        assert!((v - 1.75f64.sqrt()).abs() < 1e-15);
        assert!((v - 1.3228756).abs() < 1e-7);
    }

    #[test]
    fn singularities_are_domain_errors() {
        let b = Bindings::new().with("q1", 1.0).with("q2", 1.0);
        let err = ev("1/(q1-q2)^2", &b).unwrap_err();
        assert!(matches!(err, ExprError::Domain { .. }), "{err}");
        let b = Bindings::new().with("x", -1.0);
        assert!(matches!(ev("sqrt(x)", &b), Err(ExprError::Domain { .. })));
        assert!(matches!(ev("log(x)", &b), Err(ExprError::Domain { .. })));
        assert!(matches!(ev("x^0.5", &b), Err(ExprError::Domain { .. })));
        let b = Bindings::new().with("x", 0.0);
        assert!(matches!(ev("x^-2", &b), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn unbound_variable() {
        assert_eq!(
            ev("x + y", &Bindings::new().with("x", 1.0)),
            Err(ExprError::Unbound("y".into()))
        );
    }

    #[test]
    fn power_rule() {
        let d = parse("q1^2").unwrap().differentiate("q1");
        assert_eq!(d.to_string(), "2*q1");
    }

    #[test]
    fn derivative_of_calogero_in_momentum() {
        let h = parse("0.5*(p1^2+p2^2)+1/(q1-q2)^2").unwrap();
        let d = h.differentiate("p1");
        assert_eq!(d, Expr::var("p1"));
    }

    #[test]
    fn derivative_wrt_absent_variable_is_zero() {
        let d = parse("sin(y)").unwrap().differentiate("x");
        assert!(d.is_zero());
    }

    #[test]
    fn derivative_of_each_function() {
        let b = Bindings::new().with("x", 0.3);
        for (text, expected) in [
            ("sin(x)", 0.3f64.cos()),
            ("cos(x)", -0.3f64.sin()),
            ("tan(x)", 1.0 / 0.3f64.cos().powi(2)),
            ("arctan(x)", 1.0 / 1.09),
            ("sqrt(x)", 0.5 / 0.3f64.sqrt()),
            ("exp(x)", 0.3f64.exp()),
            ("log(x)", 1.0 / 0.3),
            ("x^x", 0.3f64.powf(0.3) * (0.3f64.ln() + 1.0)),
            ("2^x", 2f64.powf(0.3) * 2f64.ln()),
        ] {
            let d = parse(text).unwrap().differentiate("x").eval(&b).unwrap();
            assert!((d - expected).abs() < 1e-14, "{text}: {d} vs {expected}");
        }
    }

    #[test]
    fn substitution_and_free_vars() {
        let e = parse("a*x + b").unwrap();
        let mut m = HashMap::new();
        m.insert("x".to_string(), parse("y - 1").unwrap());
        let s = e.substitute(&m);
        let vars: Vec<_> = s.free_vars().into_iter().collect();
        assert_eq!(vars, ["a", "b", "y"]);
        assert_eq!(e.fix(&[("a", 2.0), ("b", 1.0)]).to_string(), "2*x + 1");
    }
}
