//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^3^2` is `2^9`.

use thiserror::Error;

use super::{BinOp, Constant, Expr, Func, Var};

/// Parse failure at byte `offset` of the input (`offset == len` means the
/// input ended early).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::End => "end of input".to_string(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token and its starting offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let b = self.bytes();
        if start >= b.len() {
            return Ok((Tok::End, start));
        }
        let c = b[start];
        if c.is_ascii_digit() || c == b'.' {
            let mut i = start;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i < b.len() && b[i] == b'.' {
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    while j < b.len() && b[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &self.src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                expected: "a number".into(),
                found: format!("'{text}'"),
            })?;
            self.pos = i;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut i = start;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            self.pos = i;
            return Ok((Tok::Ident(self.src[start..i].to_string()), start));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError {
            offset: start,
            expected: "an operand or operator".into(),
            found: format!("'{ch}'"),
        })
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (t, at) = self.lex.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.at,
            expected: expected.to_string(),
            found: self.tok.describe(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump()?;
        let start = self.at;
        let exponent = self.unary()?;
        if !exponent.is_constant() {
            return Err(ParseError {
                offset: start,
                expected: "a constant exponent".into(),
                found: format!("'{exponent}'"),
            });
        }
        Ok(Expr::binary(BinOp::Pow, base, exponent))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect_close()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.bump()?;
                    if self.tok != Tok::Op('(') {
                        return self.fail(&format!("'(' after function {name}"));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_close()?;
                    return Ok(Expr::func(f, arg));
                }
                let e = match name.as_str() {
                    "x" => Expr::Var(Var::X),
                    "y" => Expr::Var(Var::Y),
                    "z" => Expr::Var(Var::Z),
                    "t" => Expr::Var(Var::T),
                    "pi" => Expr::Const(Constant::Pi),
                    "euler" => Expr::Const(Constant::Euler),
                    _ => return self.fail("a variable (x, y, z, t), constant or function"),
                };
                self.bump()?;
                Ok(e)
            }
            _ => self.fail("a number, name or '('"),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        if self.tok != Tok::Op(')') {
            return self.fail("')'");
        }
        self.bump()
    }
}

/// Parses a scalar expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lex: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.fail("an operator or end of input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offset(s: &str) -> usize {
        parse_expr(s).unwrap_err().offset
    }

    #[test]
    fn error_offsets() {
        assert_eq!(offset("2*+x"), 2);
        assert_eq!(offset(""), 0);
        assert_eq!(offset("x+"), 2);
        assert_eq!(offset("sin x"), 4);
        assert_eq!(offset("(x"), 2);
        assert_eq!(offset("x)"), 1);
        assert_eq!(offset("x^y"), 2);
        assert_eq!(offset("foo"), 0);
        assert_eq!(offset("x # y"), 2);
        assert_eq!(offset("1 2"), 2);
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(parse_expr("1.5e-3").unwrap(), Expr::Num(1.5e-3));
        assert_eq!(parse_expr(".5").unwrap(), Expr::Num(0.5));
        // a dangling exponent marker is not part of the number
        assert!(parse_expr("2e").is_err());
    }

    #[test]
    fn associativity() {
        let e = parse_expr("x-y-z").unwrap();
        let expect = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Sub, Expr::Var(Var::X), Expr::Var(Var::Y)),
            Expr::Var(Var::Z),
        );
        assert_eq!(e, expect);
        let e = parse_expr("2^3^2").unwrap();
        assert!(matches!(e, Expr::Binary(BinOp::Pow, _, ref r) if matches!(**r, Expr::Binary(BinOp::Pow, ..))));
    }
}
