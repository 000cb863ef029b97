//! Recursive-descent parser for infix expressions.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary `-`, `^` (right
//! associative). The exponent of `^` may itself carry a unary minus, so
//! `x^-2` parses as `x^(-2)`.

use super::{BinOp, Expr, ExprError, Func};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(text: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => self.number(start)?,
            c if c.is_ascii_alphabetic() => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", c as char),
                })
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ExprError> {
        let digits = |lx: &mut Lexer| {
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mut look = self.pos + 1;
            if matches!(self.src.get(look), Some(b'+' | b'-')) {
                look += 1;
            }
            if self.src.get(look).is_some_and(u8::is_ascii_digit) {
                self.pos = look;
                digits(self);
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

/// Parses an infix expression.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: Lexer::tokens(text)?,
        i: 0,
    };
    let e = p.sum()?;
    match p.peek() {
        Tok::End => Ok(e),
        t => Err(p.err(format!("unexpected {}", describe(t)))),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("operator `{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err(&self, message: String) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == &Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == &Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Ident(name) => {
                if self.peek() != &Tok::LParen {
                    return Ok(Expr::Var(name));
                }
                let f = Func::from_name(&name)
                    .ok_or(ExprError::UnknownFunction { name, offset: at })?;
                self.bump();
                let arg = self.sum()?;
                self.expect_close()?;
                Ok(Expr::call(f, arg))
            }
            Tok::LParen => {
                let e = self.sum()?;
                self.expect_close()?;
                Ok(e)
            }
            t => Err(ExprError::Syntax {
                offset: at,
                message: format!("expected operand, found {}", describe(&t)),
            }),
        }
    }

    fn expect_close(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            t => Err(self.err(format!("expected `)`, found {}", describe(t)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_node() {
        let e = parse("p1^2").unwrap();
        assert_eq!(
            e,
            Expr::Binary(
                BinOp::Pow,
                Box::new(Expr::var("p1")),
                Box::new(Expr::Const(2.0))
            )
        );
    }

    #[test]
    fn incomplete_input_reports_offset() {
        assert_eq!(
            parse("q1+"),
            Err(ExprError::Syntax {
                offset: 3,
                message: "expected operand, found end of input".into()
            })
        );
        match parse("(a*b") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("a $ b") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_function() {
        assert_eq!(
            parse("1 + cosh(x)"),
            Err(ExprError::UnknownFunction {
                name: "cosh".into(),
                offset: 4
            })
        );
    }

    #[test]
    fn precedence() {
        use crate::expr::Bindings;
        let b = Bindings::new().with("x", 3.0);
        let cases = [
            ("-x^2", -9.0),
            ("2^3^2", 512.0),
            ("x^-1", 1.0 / 3.0),
            ("1 - 2 - 3", -4.0),
            ("8/4/2", 1.0),
            ("2*-x", -6.0),
            ("1.5e1 + 2E-1", 15.2),
            ("(x)", 3.0),
        ];
        for (text, v) in cases {
            assert_eq!(parse(text).unwrap().eval(&b).unwrap(), v, "{text}");
        }
    }

    #[test]
    fn identifiers_with_digits_and_underscores() {
        let e = parse("p_theta2 + e").unwrap();
        let vars: Vec<_> = e.free_vars().into_iter().collect();
        assert_eq!(vars, ["e", "p_theta2"]);
        // `2e` is a number followed by an identifier, which is not valid.
        assert!(parse("2e").is_err());
    }
}
