//! Recursive-descent parser for the infix expression language.
//!
//! ```text
//! expr     = term { ("+" | "-") term } ;
//! term     = unary { ("*" | "/") unary } ;
//! unary    = ("-" | "+") unary | power ;
//! power    = atom [ "^" exponent ] ;
//! exponent = ["-" | "+"] number | "(" ["-" | "+"] number ")" ;
//! atom     = number | name | func "(" expr ")" | "(" expr ")" ;
//! ```
//!
//! `name` is a declared coordinate or the constant `pi`. Unary minus binds looser than
//! `^`, so `-x^2` is `-(x^2)`. Chained powers such as `x^2^3` are rejected.

use super::{BinaryOp, ScalarExpr, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` at byte {offset} takes exactly one argument, found {found}")]
    Arity {
        name: String,
        offset: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(u8),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(|v| (Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self
                .src
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok((Tok::Ident(name), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Sym(c), start));
        }
        Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character {:?}", char_at(self.src, start)),
        })
    }

    fn number(&mut self, start: usize) -> Result<f64, ParseError> {
        let digits = |lx: &mut Lexer| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            }),
        }
    }
}

fn char_at(src: &[u8], pos: usize) -> char {
    std::str::from_utf8(&src[pos..])
        .ok()
        .and_then(|s| s.chars().next())
        .unwrap_or(src[pos] as char)
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
    coords: &'a [&'a str],
}

/// Parses `text` over the ordered coordinate names `coords`.
pub fn parse(text: &str, coords: &[&str]) -> Result<ScalarExpr, ParseError> {
    let mut lexer = Lexer {
        src: text.as_bytes(),
        pos: 0,
    };
    let (tok, at) = lexer.next()?;
    let mut p = Parser {
        lexer,
        tok,
        at,
        coords,
    };
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.unexpected("end of input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match &self.tok {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{}`", *c as char),
            Tok::End => "end of input".to_string(),
        };
        ParseError::Syntax {
            offset: self.at,
            message: format!("expected {wanted}, found {found}"),
        }
    }

    fn eat(&mut self, c: u8) -> Result<bool, ParseError> {
        if self.tok == Tok::Sym(c) {
            self.bump()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'+') => BinaryOp::Add,
                Tok::Sym(b'-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = ScalarExpr::raw_binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'*') => BinaryOp::Mul,
                Tok::Sym(b'/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = ScalarExpr::raw_binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr, ParseError> {
        if self.eat(b'-')? {
            let inner = self.unary()?;
            return Ok(ScalarExpr::raw_unary(UnaryOp::Neg, inner));
        }
        if self.eat(b'+')? {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if !self.eat(b'^')? {
            return Ok(base);
        }
        let e = self.exponent()?;
        if self.tok == Tok::Sym(b'^') {
            return Err(ParseError::Syntax {
                offset: self.at,
                message: "chained `^` is ambiguous; use parentheses".into(),
            });
        }
        Ok(ScalarExpr::raw_pow(base, e))
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let mut sign = 1.0;
        if self.eat(b'-')? {
            sign = -1.0;
        } else {
            self.eat(b'+')?;
        }
        match self.tok {
            Tok::Num(v) => {
                self.bump()?;
                Ok(sign * v)
            }
            _ => Err(self.unexpected("numeric exponent")),
        }
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        if self.eat(b'(')? {
            let v = self.signed_number()?;
            if !self.eat(b')')? {
                return Err(self.unexpected("`)`"));
            }
            Ok(v)
        } else {
            self.signed_number()
        }
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(ScalarExpr::constant(v))
            }
            Tok::Sym(b'(') => {
                self.bump()?;
                let e = self.expr()?;
                if !self.eat(b')')? {
                    return Err(self.unexpected("`)`"));
                }
                Ok(e)
            }
            Tok::Ident(name) => {
                let offset = self.at;
                self.bump()?;
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(ScalarExpr::var(i));
                }
                if let Some(op) = UnaryOp::from_name(&name) {
                    return self.call(op, name, offset);
                }
                if name == "pi" {
                    return Ok(ScalarExpr::constant(std::f64::consts::PI));
                }
                Err(ParseError::UnknownIdentifier { name, offset })
            }
            _ => Err(self.unexpected("number, name or `(`")),
        }
    }

    fn call(&mut self, op: UnaryOp, name: String, offset: usize) -> Result<ScalarExpr, ParseError> {
        if !self.eat(b'(')? {
            return Err(ParseError::Arity {
                name,
                offset,
                found: 0,
            });
        }
        if self.eat(b')')? {
            return Err(ParseError::Arity {
                name,
                offset,
                found: 0,
            });
        }
        let arg = self.expr()?;
        let mut found = 1;
        while self.eat(b',')? {
            self.expr()?;
            found += 1;
        }
        if !self.eat(b')')? {
            return Err(self.unexpected("`)`"));
        }
        if found != 1 {
            return Err(ParseError::Arity {
                name,
                offset,
                found,
            });
        }
        Ok(ScalarExpr::raw_unary(op, arg))
    }
}
