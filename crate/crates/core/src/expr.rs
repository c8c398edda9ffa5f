//! Arithmetic expressions over coordinates, expanded into truncated series.
//!
//! Grammar, lowest precedence first:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := ("+" | "-") unary | power
//! power  := atom ("^" integer)?
//! atom   := number | name | "exp" "(" expr ")" | "(" expr ")"
//! ```
//!
//! Numbers are integers or decimals (`0.25` is read exactly as `1/4`).
//! Division is only allowed by series with nonzero constant term.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::{Rational, TruncatedSeries};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    /// Returns the token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            let len = rest
                .find(|ch: char| !(ch.is_ascii_digit() || ch == '.'))
                .unwrap_or(rest.len());
            let text = &rest[..len];
            self.pos += len;
            let value = parse_decimal(text).ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("malformed number {text:?}"),
            })?;
            return Ok((Tok::Num(value), start));
        }
        if c.is_alphabetic() || c == '_' {
            let len = rest
                .find(|ch: char| !(ch.is_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            self.pos += len;
            return Ok((Tok::Ident(rest[..len].to_string()), start));
        }
        if "+-*/^()".contains(c) {
            self.pos += 1;
            return Ok((Tok::Op(c), start));
        }
        Err(Error::Parse {
            offset: start,
            message: format!("unexpected character {c:?}"),
        })
    }
}

fn parse_decimal(text: &str) -> Option<Rational> {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if int.is_empty() && frac.is_empty() || frac.contains('.') {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    Some(Rational::new(numer, denom))
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    names: &'a [String],
    cap: u32,
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<()> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.at,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match &self.tok {
            Tok::Num(q) => format!("number {q}"),
            Tok::Ident(s) => format!("name {s:?}"),
            Tok::Op(c) => format!("{c:?}"),
            Tok::End => "end of input".into(),
        }
    }

    fn n(&self) -> usize {
        self.names.len()
    }

    fn expr(&mut self) -> Result<TruncatedSeries> {
        let mut acc = self.term()?;
        while let Tok::Op(op @ ('+' | '-')) = self.tok {
            self.advance()?;
            let rhs = self.term()?;
            acc = if op == '+' { &acc + &rhs } else { &acc - &rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<TruncatedSeries> {
        let mut acc = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = self.tok {
            let at = self.at;
            self.advance()?;
            let rhs = self.unary()?;
            acc = if op == '*' {
                &acc * &rhs
            } else {
                let inv = rhs.invert_unit().map_err(|_| Error::Parse {
                    offset: at,
                    message: "division by a series with zero constant term".into(),
                })?;
                &acc * &inv
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<TruncatedSeries> {
        match self.tok {
            Tok::Op('-') => {
                self.advance()?;
                Ok(self.unary()?.neg())
            }
            Tok::Op('+') => {
                self.advance()?;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<TruncatedSeries> {
        let base = self.atom()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.advance()?;
        let Tok::Num(k) = &self.tok else {
            return self.err(format!(
                "expected an integer exponent, found {}",
                self.describe()
            ));
        };
        if !k.is_integer() {
            return self.err("exponent must be a non-negative integer");
        }
        let Ok(k) = u32::try_from(k.to_integer()) else {
            return self.err("exponent must be a non-negative integer");
        };
        self.advance()?;
        Ok(base.pow(k))
    }

    fn atom(&mut self) -> Result<TruncatedSeries> {
        match self.tok.clone() {
            Tok::Num(q) => {
                self.advance()?;
                Ok(TruncatedSeries::constant(self.n(), self.cap, q))
            }
            Tok::Op('(') => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Ident(name) if name == "exp" => {
                let at = self.at;
                self.advance()?;
                if self.tok != Tok::Op('(') {
                    return self.err(format!("expected '(' after exp, found {}", self.describe()));
                }
                self.advance()?;
                let arg = self.expr()?;
                self.expect_close()?;
                arg.exp().map_err(|_| Error::Parse {
                    offset: at,
                    message: "exp() needs an argument with zero constant term".into(),
                })
            }
            Tok::Ident(name) => {
                let Some(axis) = self.names.iter().position(|s| *s == name) else {
                    return self.err(format!("unknown identifier {name:?}"));
                };
                self.advance()?;
                TruncatedSeries::var(self.n(), self.cap, axis)
            }
            _ => self.err(format!("expected a value, found {}", self.describe())),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        if self.tok != Tok::Op(')') {
            return self.err(format!("expected ')', found {}", self.describe()));
        }
        self.advance()
    }
}

/// Default coordinate names `x0, x1, …`.
pub fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Parses `text` over the coordinates `names`, truncating at total degree
/// `order`.
pub fn parse_expression(text: &str, names: &[String], order: u32) -> Result<TruncatedSeries> {
    let mut p = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
        names,
        cap: order,
    };
    p.advance()?;
    let value = p.expr()?;
    if p.tok != Tok::End {
        return p.err(format!("unexpected {} after expression", p.describe()));
    }
    Ok(value)
}

/// Parses a rational constant expression such as `-3/4`.
pub fn parse_constant(text: &str) -> Result<Rational> {
    let s = parse_expression(text, &[], 0)?;
    Ok(if s.is_empty() {
        Rational::zero()
    } else {
        s.constant_term()
    })
}
