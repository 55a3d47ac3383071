//! Small expression language for writing operators in configs.
//!
//! ```text
//! expr   := term (('+' | '-') term)* ['+' 'h.c.']
//! term   := unary ('*' unary)*
//! unary  := '-' unary | atom
//! atom   := number | 'i' | op '(' site [',' flavor] ')' | '(' expr ')'
//! op     := 'adag' | 'a' | 'n'
//! site   := integer | '[' integer ',' integer ']'
//! ```
//!
//! A bare integer site is an index into the lattice site list; `[x, y]` is a
//! coordinate. `a` and `adag` default to flavor 0, `n(x)` without a flavor sums
//! all flavors at `x`. A trailing `+ h.c.` adds the adjoint of everything
//! before it.

use crate::caralg::FockSpace;
use crate::error::{NeassError, Result};
use crate::linalg::{self, Matrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum SiteRef {
    Index(usize),
    Coord([i64; 2]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpName {
    Create,
    Annihilate,
    Number,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(C64),
    Op { op: OpName, site: SiteRef, flavor: Option<usize> },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    PlusHc(Box<Expr>),
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.expr(true)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

/// Parses and evaluates in one go.
pub fn build(space: &FockSpace, src: &str) -> Result<Matrix> {
    parse(src)?.evaluate(space)
}

enum Value {
    Scalar(C64),
    Op(Matrix),
}

impl Value {
    fn into_matrix(self, space: &FockSpace) -> Matrix {
        match self {
            Value::Scalar(c) => linalg::scale(&space.identity(), c),
            Value::Op(m) => m,
        }
    }
}

impl Expr {
    pub fn evaluate(&self, space: &FockSpace) -> Result<Matrix> {
        Ok(self.eval(space)?.into_matrix(space))
    }

    /// Site indices referenced by the expression, sorted and deduplicated.
    pub fn sites(&self, space: &FockSpace) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.collect_sites(space, &mut out)?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn collect_sites(&self, space: &FockSpace, out: &mut Vec<usize>) -> Result<()> {
        match self {
            Expr::Number(_) => Ok(()),
            Expr::Op { site, .. } => {
                out.push(resolve_site(space, site)?);
                Ok(())
            }
            Expr::Neg(e) | Expr::PlusHc(e) => e.collect_sites(space, out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_sites(space, out)?;
                b.collect_sites(space, out)
            }
        }
    }

    fn eval(&self, space: &FockSpace) -> Result<Value> {
        Ok(match self {
            Expr::Number(c) => Value::Scalar(*c),
            Expr::Op { op, site, flavor } => {
                let x = resolve_site(space, site)?;
                let flavors = space.geometry().flavors();
                if let Some(f) = flavor {
                    if *f >= flavors {
                        return Err(NeassError::Validation(format!("flavor {f} out of range (lattice has {flavors})")));
                    }
                }
                let f = flavor.unwrap_or(0);
                Value::Op(match op {
                    OpName::Create => space.creation(x, f),
                    OpName::Annihilate => space.annihilation(x, f),
                    OpName::Number => match flavor {
                        Some(f) => space.number_flavor(x, *f),
                        None => space.number(x),
                    },
                })
            }
            Expr::Neg(e) => match e.eval(space)? {
                Value::Scalar(c) => Value::Scalar(-c),
                Value::Op(m) => Value::Op(linalg::scale_real(&m, -1.0)),
            },
            Expr::Add(a, b) => combine(space, a.eval(space)?, b.eval(space)?, 1.0),
            Expr::Sub(a, b) => combine(space, a.eval(space)?, b.eval(space)?, -1.0),
            Expr::Mul(a, b) => match (a.eval(space)?, b.eval(space)?) {
                (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(x * y),
                (Value::Scalar(x), Value::Op(m)) | (Value::Op(m), Value::Scalar(x)) => Value::Op(linalg::scale(&m, x)),
                (Value::Op(x), Value::Op(y)) => Value::Op(&x * &y),
            },
            Expr::PlusHc(e) => {
                let m = e.eval(space)?.into_matrix(space);
                let adj = linalg::adjoint(&m);
                Value::Op(&m + &adj)
            }
        })
    }
}

fn combine(space: &FockSpace, a: Value, b: Value, sign: f64) -> Value {
    match (a, b) {
        (Value::Scalar(x), Value::Scalar(y)) => Value::Scalar(x + y * sign),
        (a, b) => {
            let mut m = a.into_matrix(space);
            linalg::add_scaled_real(&mut m, sign, &b.into_matrix(space));
            Value::Op(m)
        }
    }
}

fn resolve_site(space: &FockSpace, site: &SiteRef) -> Result<usize> {
    let geo = space.geometry();
    match site {
        SiteRef::Index(i) if *i < geo.num_sites() => Ok(*i),
        SiteRef::Index(i) => {
            Err(NeassError::Validation(format!("site index {i} out of range (lattice has {} sites)", geo.num_sites())))
        }
        SiteRef::Coord(c) => geo
            .site_index(*c)
            .ok_or_else(|| NeassError::Validation(format!("site [{}, {}] is not in the lattice", c[0], c[1]))),
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> NeassError {
        NeassError::Parse { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn at_hc(&mut self) -> bool {
        self.skip_ws();
        self.src[self.pos..].starts_with(b"h.c.")
    }

    fn expr(&mut self, top: bool) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                if self.at_hc() {
                    if !top {
                        return Err(self.error("'h.c.' is only allowed at the end of the top level"));
                    }
                    self.pos += 4;
                    self.skip_ws();
                    if self.pos != self.src.len() {
                        return Err(self.error("'h.c.' must be the last term"));
                    }
                    return Ok(Expr::PlusHc(Box::new(lhs)));
                }
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.eat(b'*') {
            let rhs = self.unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr(false)?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Number(C64::new(self.number()?, 0.0))),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let op = match word {
                    "i" => return Ok(Expr::Number(C64::new(0.0, 1.0))),
                    "adag" => OpName::Create,
                    "a" => OpName::Annihilate,
                    "n" => OpName::Number,
                    _ => {
                        self.pos = start;
                        return Err(self.error(&format!("unknown identifier '{word}'")));
                    }
                };
                self.expect(b'(')?;
                let site = self.site()?;
                let flavor = if self.eat(b',') { Some(self.integer()? as usize) } else { None };
                self.expect(b')')?;
                Ok(Expr::Op { op, site, flavor })
            }
            _ => Err(self.error("expected a number, 'i', an operator or '('")),
        }
    }

    fn site(&mut self) -> Result<SiteRef> {
        if self.eat(b'[') {
            let x = self.integer()?;
            self.expect(b',')?;
            let y = self.integer()?;
            self.expect(b']')?;
            Ok(SiteRef::Coord([x, y]))
        } else {
            let i = self.integer()?;
            if i < 0 {
                return Err(self.error("site index must be non-negative"));
            }
            Ok(SiteRef::Index(i as usize))
        }
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.src.len() && self.src[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).ok().and_then(|s| s.parse().ok()).ok_or_else(|| {
            self.pos = start;
            self.error("expected an integer")
        })
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let mut seen_exp = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let sign_after_exp = (c == b'+' || c == b'-') && seen_exp && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || sign_after_exp {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && !seen_exp {
                seen_exp = true;
                self.pos += 1;
            } else {
                break;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos]).ok().and_then(|s| s.parse().ok()).ok_or_else(|| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caralg::LatticeGeometry;
    use crate::linalg::max_abs;

    fn space() -> FockSpace {
        FockSpace::new(LatticeGeometry::chain(3, 1).unwrap()).unwrap()
    }

    #[test]
    fn hopping_with_hermitian_conjugate() {
        let s = space();
        let m = build(&s, "-1.5 * adag(0) * a(1) + h.c.").unwrap();
        let hop = s.creation(0, 0) * s.annihilation(1, 0);
        let expect = linalg::scale_real(&(&hop + &linalg::adjoint(&hop)), -1.5);
        assert!(max_abs(&(&m - &expect)) < 1e-15);
    }

    #[test]
    fn current_operator() {
        let s = space();
        let m = build(&s, "i * (adag(1) * a(2) - adag(2) * a(1))").unwrap();
        assert!(linalg::hermitian_deviation(&m) < 1e-15);
        let alt = build(&s, "i * adag(1) * a(2) + h.c.").unwrap();
        assert!(max_abs(&(&m - &alt)) < 1e-15);
    }

    #[test]
    fn scalars_numbers_and_coordinates() {
        let s = space();
        let m = build(&s, "2e-1 * n([2, 0]) - 0.5").unwrap();
        let expect = &linalg::scale_real(&s.number(2), 0.2) - &linalg::scale_real(&s.identity(), 0.5);
        assert!(max_abs(&(&m - &expect)) < 1e-15);
        assert_eq!(parse("n(1) * n(2)").unwrap().sites(&s).unwrap(), vec![1, 2]);
    }

    #[test]
    fn errors_carry_offsets() {
        let s = space();
        assert!(matches!(parse("adag(0) +"), Err(NeassError::Parse { .. })));
        assert!(matches!(parse("foo(1)"), Err(NeassError::Parse { offset: 0, .. })));
        assert!(matches!(parse("(n(0) + h.c.)"), Err(NeassError::Parse { .. })));
        assert!(matches!(build(&s, "n(7)"), Err(NeassError::Validation(_))));
        assert!(matches!(build(&s, "a(0, 2)"), Err(NeassError::Validation(_))));
    }
}
