//! Recursive-descent parser for the expression language.
//!
//! ```text
//! expr   := term ('*' term)*
//! term   := atom | dsum(q: expr, ...) | scale(expr, scale) | sub(expr, letter, ...) | (expr)
//! atom   := LF(q | inf) | M(int) | C | H | R | ident
//! letter := [scale, expr] | fam(q, q, int | inf, expr)
//! scale  := q | sqrt(q)
//! ```

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use factor_calc_core::expr::{Count, Expr, LetterExpr};
use factor_calc_core::scalar::{ExtRational, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{}'", s),
            Tok::Int(n) => write!(f, "'{}'", n),
            Tok::Sym(c) => write!(f, "'{}'", c),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), line: l0, col: c0 });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse::<BigInt>().expect("ascii digits");
            out.push(Spanned { tok: Tok::Int(n), line: l0, col: c0 });
        } else if "()[],:*/-=".contains(c) {
            i += 1;
            col += 1;
            out.push(Spanned { tok: Tok::Sym(c), line: l0, col: c0 });
        } else {
            return Err(ParseError { line, col, message: format!("unexpected character '{}'", c) });
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Token cursor over one input.
pub struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let s = &self.toks[self.pos];
        Err(ParseError { line: s.line, col: s.col, message: message.into() })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{}', found {}", c, self.peek()))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn at_end(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    /// Fails unless all input was consumed.
    pub fn finish(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            self.err(format!("unexpected {} after expression", self.peek()))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected a name, found {}", other)),
        }
    }

    pub fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn peek_int(&self) -> bool {
        matches!(self.peek(), Tok::Int(_))
    }

    pub fn eat_sym(&mut self, c: char) -> bool {
        self.eat(c)
    }

    pub fn integer(&mut self) -> Result<BigInt, ParseError> {
        let neg = self.eat('-');
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            other => self.err(format!("expected an integer, found {}", other)),
        }
    }

    pub fn rational(&mut self) -> Result<Rational, ParseError> {
        let n = self.integer()?;
        if self.eat('/') {
            let at = self.pos;
            let d = self.integer()?;
            if d == BigInt::from(0) {
                self.pos = at;
                return self.err("zero denominator");
            }
            Ok(BigRational::new(n, d))
        } else {
            Ok(BigRational::from_integer(n))
        }
    }

    /// `q` or `sqrt(q)`, returned squared.
    pub fn scale(&mut self) -> Result<Rational, ParseError> {
        if self.peek_ident() == Some("sqrt") {
            self.bump();
            self.expect('(')?;
            let q = self.rational()?;
            self.expect(')')?;
            Ok(q)
        } else {
            let at = self.pos;
            let t = self.rational()?;
            if t < BigRational::from_integer(0.into()) {
                self.pos = at;
                return self.err("a scale t must be nonnegative");
            }
            Ok(&t * &t)
        }
    }

    fn u64_value(&mut self) -> Result<u64, ParseError> {
        let at = self.pos;
        let n = self.integer()?;
        u64::try_from(n).or_else(|_| {
            self.pos = at;
            self.err("expected a nonnegative integer")
        })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let first = self.term()?;
        if *self.peek() != Tok::Sym('*') {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat('*') {
            parts.push(self.term()?);
        }
        Ok(Expr::FreeProduct(parts))
    }

    fn open(&mut self, name: &str) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym('(') {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '(' after {}", name))
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "C" => Ok(Expr::scalars()),
                    "H" => Ok(Expr::hyperfinite()),
                    "R" => Ok(Expr::hyperfinite_factor()),
                    "LF" => {
                        self.open("LF")?;
                        let r = if self.peek_ident() == Some("inf") {
                            self.bump();
                            ExtRational::Infinity
                        } else {
                            ExtRational::Finite(self.rational()?)
                        };
                        self.expect(')')?;
                        Ok(Expr::Fgf(r))
                    }
                    "M" => {
                        self.open("M")?;
                        let n = self.u64_value()?;
                        self.expect(')')?;
                        Ok(Expr::Matrix(n))
                    }
                    "dsum" => {
                        self.open("dsum")?;
                        let mut parts = Vec::new();
                        loop {
                            let w = self.rational()?;
                            self.expect(':')?;
                            parts.push((w, self.expr()?));
                            if !self.eat(',') {
                                break;
                            }
                        }
                        self.expect(')')?;
                        Ok(Expr::DirectSum(parts))
                    }
                    "scale" => {
                        self.open("scale")?;
                        let e = self.expr()?;
                        self.expect(',')?;
                        let sq = self.scale()?;
                        self.expect(')')?;
                        Ok(Expr::rescale(e, sq))
                    }
                    "sub" => {
                        self.open("sub")?;
                        let base = self.expr()?;
                        let mut letters = Vec::new();
                        while self.eat(',') {
                            letters.push(self.letter()?);
                        }
                        self.expect(')')?;
                        Ok(Expr::sub(base, letters))
                    }
                    "fam" | "sqrt" | "inf" => {
                        self.pos -= 1;
                        self.err(format!("'{}' cannot start an expression", name))
                    }
                    _ => Ok(Expr::Opaque(name)),
                }
            }
            other => self.err(format!("expected an expression, found {}", other)),
        }
    }

    fn letter(&mut self) -> Result<LetterExpr, ParseError> {
        if self.eat('[') {
            let sq = self.scale()?;
            self.expect(',')?;
            let body = self.expr()?;
            self.expect(']')?;
            return Ok(LetterExpr::Single { sq, body });
        }
        if self.peek_ident() == Some("fam") {
            self.bump();
            self.open("fam")?;
            let first_sq = self.rational()?;
            self.expect(',')?;
            let ratio = self.rational()?;
            self.expect(',')?;
            let count = if self.peek_ident() == Some("inf") {
                self.bump();
                Count::Infinite
            } else {
                Count::Finite(self.u64_value()?)
            };
            self.expect(',')?;
            let body = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::family(first_sq, ratio, count, body));
        }
        self.err(format!("expected a letter '[t, Q]' or 'fam(...)', found {}", self.peek()))
    }

    /// Whether the next tokens are `name =`.
    pub fn at_assignment(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Sym('=')
    }
}

/// Parses a complete expression.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}
