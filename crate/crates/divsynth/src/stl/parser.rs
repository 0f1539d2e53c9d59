//! Text format for formulas.
//!
//! Grammar, loosest to tightest binding:
//!
//! ```text
//! formula  := implies
//! implies  := untail ("->" implies)?            right associative
//! untail   := or (("U" | "R") window or)?       not associative
//! or       := and ("||" and)*
//! and      := unary ("&&" unary)*
//! unary    := "!" unary
//!           | ("Ev" | "Alw") window? "(" formula ")"
//!           | "(" formula ")"
//!           | "true" | "false"
//!           | atom
//! window   := "[" number "," (number | "inf") "]"
//! atom     := affine (">=" | "<=") affine
//! affine   := ("-")? term (("+" | "-") term)*
//! term     := number ("*" ident)? | ident
//! ```
//!
//! `U`, `R`, `Ev`, `Alw`, `true`, `false`, and `inf` are reserved words.
//! Whitespace is insignificant. The result is produced in negation normal
//! form. Every identifier must appear in the caller's variable list.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::formula::{to_nnf, AffineAtom, Expr, Interval};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn at(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

/// Parses `text` into a formula in negation normal form. Identifiers must
/// come from `variables`.
pub fn parse(text: &str, variables: &[String]) -> Result<super::formula::Formula, ParseError> {
    Ok(to_nnf(&parse_expr(text, variables)?))
}

/// Parses `text` without normalizing, preserving the written structure.
pub fn parse_expr(text: &str, variables: &[String]) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        variables,
    };
    let e = p.implies()?;
    let (tok, at) = p.peek();
    if !matches!(tok, Tok::Eof) {
        return Err(ParseError::at(at, format!("unexpected `{tok}` after formula")));
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    AndAnd,
    OrOr,
    Bang,
    Arrow,
    Ge,
    Le,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Number(v) => write!(f, "{v}"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::Comma => write!(f, ","),
            Tok::Plus => write!(f, "+"),
            Tok::Minus => write!(f, "-"),
            Tok::Star => write!(f, "*"),
            Tok::AndAnd => write!(f, "&&"),
            Tok::OrOr => write!(f, "||"),
            Tok::Bang => write!(f, "!"),
            Tok::Arrow => write!(f, "->"),
            Tok::Ge => write!(f, ">="),
            Tok::Le => write!(f, "<="),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |i: &mut usize, n: usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(&mut i, 1, &mut col),
            '(' => {
                out.push((Tok::LParen, pos));
                advance(&mut i, 1, &mut col);
            }
            ')' => {
                out.push((Tok::RParen, pos));
                advance(&mut i, 1, &mut col);
            }
            '[' => {
                out.push((Tok::LBracket, pos));
                advance(&mut i, 1, &mut col);
            }
            ']' => {
                out.push((Tok::RBracket, pos));
                advance(&mut i, 1, &mut col);
            }
            ',' => {
                out.push((Tok::Comma, pos));
                advance(&mut i, 1, &mut col);
            }
            '+' => {
                out.push((Tok::Plus, pos));
                advance(&mut i, 1, &mut col);
            }
            '*' => {
                out.push((Tok::Star, pos));
                advance(&mut i, 1, &mut col);
            }
            '!' => {
                out.push((Tok::Bang, pos));
                advance(&mut i, 1, &mut col);
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    out.push((Tok::Arrow, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    out.push((Tok::Minus, pos));
                    advance(&mut i, 1, &mut col);
                }
            }
            '&' => {
                if chars.get(i + 1) == Some(&'&') {
                    out.push((Tok::AndAnd, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    return Err(ParseError::at(pos, "expected `&&`"));
                }
            }
            '|' => {
                if chars.get(i + 1) == Some(&'|') {
                    out.push((Tok::OrOr, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    return Err(ParseError::at(pos, "expected `||`"));
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push((Tok::Ge, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    return Err(ParseError::at(pos, "expected `>=` (strict comparisons are not supported)"));
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push((Tok::Le, pos));
                    advance(&mut i, 2, &mut col);
                } else {
                    return Err(ParseError::at(pos, "expected `<=` (strict comparisons are not supported)"));
                }
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| ParseError::at(pos, format!("bad number `{s}`")))?;
                col += i - start;
                out.push((Tok::Number(v), pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                out.push((Tok::Ident(s), pos));
            }
            other => {
                return Err(ParseError::at(pos, format!("unexpected character `{other}`")));
            }
        }
    }
    out.push((
        Tok::Eof,
        Pos { line, col },
    ));
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, Pos)>,
    pos: usize,
    variables: &'a [String],
}

const RESERVED: &[&str] = &["U", "R", "Ev", "Alw", "true", "false", "inf"];

impl<'a> Parser<'a> {
    fn peek(&self) -> (&Tok, Pos) {
        let (t, p) = &self.tokens[self.pos];
        (t, *p)
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let (t, p) = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        (t, p)
    }

    fn expect(&mut self, want: &Tok) -> Result<Pos, ParseError> {
        let (t, p) = self.bump();
        if &t == want {
            Ok(p)
        } else {
            Err(ParseError::at(p, format!("expected `{want}`, found `{t}`")))
        }
    }

    fn implies(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.untail()?;
        if matches!(self.peek().0, Tok::Arrow) {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Expr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn untail(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.or()?;
        let until = match self.peek().0 {
            Tok::Ident(s) if s == "U" => true,
            Tok::Ident(s) if s == "R" => false,
            _ => return Ok(lhs),
        };
        self.bump();
        let iv = self.window()?;
        let rhs = self.or()?;
        Ok(if until {
            Expr::Until(iv, Box::new(lhs), Box::new(rhs))
        } else {
            Expr::Release(iv, Box::new(lhs), Box::new(rhs))
        })
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut parts = vec![self.and()?];
        while matches!(self.peek().0, Tok::OrOr) {
            self.bump();
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Expr::Or(parts)
        })
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut parts = vec![self.unary()?];
        while matches!(self.peek().0, Tok::AndAnd) {
            self.bump();
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Expr::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let (tok, at) = self.peek();
        match tok {
            Tok::Bang => {
                self.bump();
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Tok::Ident(s) if s == "Ev" || s == "Alw" => {
                let eventually = s == "Ev";
                self.bump();
                let iv = if matches!(self.peek().0, Tok::LBracket) {
                    self.window()?
                } else {
                    Interval::full()
                };
                self.expect(&Tok::LParen)?;
                let inner = self.implies()?;
                self.expect(&Tok::RParen)?;
                Ok(if eventually {
                    Expr::Eventually(iv, Box::new(inner))
                } else {
                    Expr::Always(iv, Box::new(inner))
                })
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Expr::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Expr::False)
            }
            Tok::LParen => {
                // Either a parenthesized formula or an atom whose left side
                // starts with `(`; atoms never start with `(` in this
                // grammar, so this is always a formula.
                self.bump();
                let inner = self.implies()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(_) | Tok::Number(_) | Tok::Minus => self.atom(),
            other => Err(ParseError::at(at, format!("expected a formula, found `{other}`"))),
        }
    }

    fn window(&mut self) -> Result<Interval, ParseError> {
        let open = self.expect(&Tok::LBracket)?;
        let lo = self.number()?;
        self.expect(&Tok::Comma)?;
        let hi = match self.peek().0 {
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                f64::INFINITY
            }
            _ => self.number()?,
        };
        self.expect(&Tok::RBracket)?;
        Interval::new(lo, hi).map_err(|e| ParseError::at(open, e.to_string()))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let (t, p) = self.bump();
        match t {
            Tok::Number(v) => Ok(v),
            other => Err(ParseError::at(p, format!("expected a number, found `{other}`"))),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.peek().1;
        let (mut terms, mut offset) = self.affine()?;
        let (op, _) = self.bump();
        let flip = match op {
            Tok::Ge => false,
            Tok::Le => true,
            other => {
                return Err(ParseError::at(
                    at,
                    format!("expected `>=` or `<=` in comparison, found `{other}`"),
                ))
            }
        };
        let (rterms, roffset) = self.affine()?;
        // Normalize to lhs - rhs >= 0, or rhs - lhs >= 0 for `<=`.
        if flip {
            for v in terms.values_mut() {
                *v = -*v;
            }
            offset = -offset;
        }
        let sign = if flip { 1.0 } else { -1.0 };
        for (k, v) in rterms {
            *terms.entry(k).or_insert(0.0) += sign * v;
        }
        offset += sign * roffset;
        let atom = AffineAtom::new(terms.into_iter().collect(), offset)
            .map_err(|e| ParseError::at(at, e.to_string()))?;
        Ok(Expr::Atom(atom))
    }

    /// Affine combination as a variable -> coefficient map plus a constant.
    fn affine(&mut self) -> Result<(BTreeMap<String, f64>, f64), ParseError> {
        let mut terms = BTreeMap::new();
        let mut offset = 0.0;
        let mut sign = 1.0;
        if matches!(self.peek().0, Tok::Minus) {
            self.bump();
            sign = -1.0;
        }
        loop {
            let (tok, at) = self.bump();
            match tok {
                Tok::Number(v) => {
                    if matches!(self.peek().0, Tok::Star) {
                        self.bump();
                        let (t, p) = self.bump();
                        match t {
                            Tok::Ident(name) => {
                                self.known_variable(&name, p)?;
                                *terms.entry(name).or_insert(0.0) += sign * v;
                            }
                            other => {
                                return Err(ParseError::at(
                                    p,
                                    format!("expected a variable after `*`, found `{other}`"),
                                ))
                            }
                        }
                    } else {
                        offset += sign * v;
                    }
                }
                Tok::Ident(name) => {
                    self.known_variable(&name, at)?;
                    *terms.entry(name).or_insert(0.0) += sign;
                }
                other => {
                    return Err(ParseError::at(
                        at,
                        format!("expected a term, found `{other}`"),
                    ))
                }
            }
            match self.peek().0 {
                Tok::Plus => {
                    self.bump();
                    sign = 1.0;
                }
                Tok::Minus => {
                    self.bump();
                    sign = -1.0;
                }
                _ => break,
            }
        }
        Ok((terms, offset))
    }

    fn known_variable(&self, name: &str, at: Pos) -> Result<(), ParseError> {
        if RESERVED.contains(&name) {
            return Err(ParseError::at(
                at,
                format!("`{name}` is a reserved word, not a variable"),
            ));
        }
        if !self.variables.iter().any(|v| v == name) {
            return Err(ParseError::at(at, format!("unknown variable `{name}`")));
        }
        Ok(())
    }
}
