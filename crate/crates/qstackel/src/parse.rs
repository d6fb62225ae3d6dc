//! Recursive-descent parser for the plain-text expression syntax.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | ident | 'exp' '(' expr ')' | '(' expr ')'
//! ```
//!
//! `t<j>` are times, `q<i>`/`p<i>` phase variables (when the target ring has
//! them) and any other identifier, optionally suffixed by `[int]`, is a
//! parameter.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::coeffring::{CoeffExpr, Q};
use crate::error::{Error, Result};

pub trait ParseRing: Sized + Clone {
    fn from_coeff(c: CoeffExpr) -> Self;
    fn as_coeff(&self) -> Option<CoeffExpr>;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn pow(&self, k: i64) -> Result<Self>;
    /// Division by anything other than a rational constant.
    fn div(&self, o: &Self) -> Result<Self>;
}

impl ParseRing for CoeffExpr {
    fn from_coeff(c: CoeffExpr) -> Self {
        c
    }
    fn as_coeff(&self) -> Option<CoeffExpr> {
        Some(self.clone())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn pow(&self, k: i64) -> Result<Self> {
        if k < 0 {
            return Err(Error::Parse("negative power in coefficient".into()));
        }
        Ok(CoeffExpr::pow(self, k as u32))
    }
    fn div(&self, _o: &Self) -> Result<Self> {
        Err(Error::Parse("division by a non-constant".into()))
    }
}

/// Hook resolving phase-space identifiers such as `q2`.
pub type AtomHook<'a, R> = &'a dyn Fn(&str) -> Option<Result<R>>;

struct Parser<'a, R> {
    s: &'a [u8],
    pos: usize,
    hook: AtomHook<'a, R>,
}

impl<'a, R: ParseRing> Parser<'a, R> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {}", self.pos))
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() != Some(c) {
            return Err(self.err(&format!("expected '{}'", c as char)));
        }
        self.pos += 1;
        Ok(())
    }

    fn expr(&mut self) -> Result<R> {
        let mut acc: R = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<R> {
        let mut acc: R = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d: R = self.unary()?;
                    let dq = d.as_coeff().and_then(|c| c.as_q());
                    acc = match dq {
                        Some(q) if !q.is_zero() => acc.mul(&R::from_coeff(CoeffExpr::from_q(q.recip()))),
                        Some(_) => return Err(self.err("division by zero")),
                        None => acc.div(&d)?,
                    };
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<R> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<R> {
        let base: R = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = if self.peek() == Some(b'(') {
                self.pos += 1;
                let k = self.integer()?;
                self.expect(b')')?;
                k
            } else {
                self.integer()?
            };
            return base.pow(k);
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64> {
        self.ws();
        let start = self.pos;
        if self.s.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("expected integer"))
    }

    fn atom(&mut self) -> Result<R> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let v: BigInt = std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().unwrap();
                Ok(R::from_coeff(CoeffExpr::from_q(Q::from_integer(v))))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len()
                    && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let mut name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                if name == "exp" {
                    self.expect(b'(')?;
                    let arg = self.expr()?.as_coeff().ok_or_else(|| self.err("exp of a phase expression"))?;
                    self.expect(b')')?;
                    return exp_of_linear(&arg)
                        .map(R::from_coeff)
                        .ok_or_else(|| self.err("exp argument must be an integer combination of times"));
                }
                if let Some(j) = name.strip_prefix('t').and_then(|r| r.parse::<usize>().ok()) {
                    if j == 0 {
                        return Err(self.err("time index starts at 1"));
                    }
                    return Ok(R::from_coeff(CoeffExpr::t(j)));
                }
                if let Some(r) = (self.hook)(&name) {
                    return r;
                }
                if self.s.get(self.pos) == Some(&b'[') {
                    self.pos += 1;
                    let k = self.integer()?;
                    if self.s.get(self.pos) != Some(&b']') {
                        return Err(self.err("expected ']'"));
                    }
                    self.pos += 1;
                    name = format!("{name}[{k}]");
                }
                Ok(R::from_coeff(CoeffExpr::param(&name)))
            }
            _ => Err(self.err("unexpected token")),
        }
    }
}

fn exp_of_linear(arg: &CoeffExpr) -> Option<CoeffExpr> {
    let mut out = CoeffExpr::one();
    for (m, c) in arg.terms() {
        if !c.denom().is_one() || !m.params.is_empty() || !m.exppow.is_empty() {
            return None;
        }
        let deg: u32 = m.tpow.iter().sum();
        if deg != 1 {
            return None;
        }
        let j = m.tpow.iter().position(|&a| a == 1)? + 1;
        out = &out * &CoeffExpr::exp(j, c.numer().to_i32()?);
    }
    Some(out)
}

pub fn parse<R: ParseRing>(s: &str) -> Result<R> {
    parse_with(s, &|_| None)
}

pub fn parse_with<R: ParseRing>(s: &str, hook: AtomHook<'_, R>) -> Result<R> {
    let mut p = Parser { s: s.as_bytes(), pos: 0, hook };
    let e = p.expr()?;
    p.ws();
    if p.pos != s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}
