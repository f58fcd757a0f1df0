//! Small infix parser for polynomial expressions: `+ - * / ^`, parentheses,
//! integer literals and named variables. Division is only allowed by constants.

use num::BigInt;

use super::{Coeff, Field, Poly, PolyError, Rational};

pub(crate) fn default_var_names(n: usize) -> Vec<String> {
    if n <= 4 {
        ["x", "y", "z", "w"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

pub(crate) fn parse(src: &str, vars: &[&str], field: Field) -> Result<Poly, PolyError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, vars, field, n: vars.len() };
    let mut aliases: Vec<String> = Vec::new();
    // x1..xn are always accepted as aliases
    for i in 1..=vars.len() {
        aliases.push(format!("x{i}"));
    }
    let out = p.expr(&aliases)?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
    field: Field,
    n: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolyError {
        PolyError::Parse { pos: self.pos, msg: msg.to_string() }
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

    fn expr(&mut self, aliases: &[String]) -> Result<Poly, PolyError> {
        let mut acc = self.term(aliases)?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = &acc + &self.term(aliases)?;
                }
                b'-' => {
                    self.pos += 1;
                    acc = &acc - &self.term(aliases)?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self, aliases: &[String]) -> Result<Poly, PolyError> {
        let mut acc = self.unary(aliases)?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    acc = &acc * &self.unary(aliases)?;
                }
                b'/' => {
                    self.pos += 1;
                    let rhs = self.unary(aliases)?;
                    if rhs.homogeneous_degree() != Some(0) {
                        return Err(self.err("division by a non-constant"));
                    }
                    let inv = rhs.coeff(&vec![0; self.n]).inv().ok_or_else(|| self.err("division by zero"))?;
                    acc = acc.scale(&inv);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self, aliases: &[String]) -> Result<Poly, PolyError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary(aliases)?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary(aliases)
            }
            _ => self.power(aliases),
        }
    }

    fn power(&mut self, aliases: &[String]) -> Result<Poly, PolyError> {
        let base = self.atom(aliases)?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let k = self.integer()?;
            let k: u32 = k.try_into().map_err(|_| self.err("exponent too large"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt, PolyError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        s.parse().map_err(|_| self.err("bad integer"))
    }

    fn atom(&mut self, aliases: &[String]) -> Result<Poly, PolyError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr(aliases)?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let v = self.integer()?;
                Ok(Poly::constant(self.n, self.field, Coeff::real(Rational::from_integer(v))))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Poly::var(self.n, self.field, i));
                }
                if let Some(i) = aliases.iter().position(|v| v == name) {
                    return Ok(Poly::var(self.n, self.field, i));
                }
                if name == "i" && self.field == Field::Complex {
                    return Ok(Poly::constant(self.n, self.field, Coeff::imag_unit()));
                }
                self.pos = start;
                Err(self.err(&format!("unknown identifier `{name}`")))
            }
            _ => Err(self.err("expected a term")),
        }
    }
}
