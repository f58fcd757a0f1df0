//! Exact sparse multivariate polynomials over ℚ and ℚ(i).
//!
//! Terms are stored in a `BTreeMap` keyed by exponent vectors under the graded
//! lexicographic order, so iteration, serialization and hashing are canonical.
//! Complex coefficients are kept as pairs of rationals; numeric kernels go
//! through [`NumericSystem`], which only accepts real polynomials (complex
//! input is realified first).

mod coeff;
mod json;
mod numeric;
mod parse;
mod system;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coeff::{format_rational, parse_rational, rational_from_f64, Coeff, Rational};
pub use json::{PolyJson, SystemJson, TermJson, FORMAT_VERSION};
pub use numeric::{NumericPoly, NumericSystem};
pub use system::PolySystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("the zero polynomial has no initial form")]
    NoInitialForm,
    #[error("cannot homogenize the zero polynomial")]
    ZeroHomogenize,
    #[error("polynomial is not homogeneous")]
    NotHomogeneous,
    #[error("polynomial is already real")]
    AlreadyReal,
    #[error("complex polynomial used where a real one is required; realify first")]
    ComplexInput,
    #[error("exponent vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("real polynomial with non-real coefficient")]
    ImaginaryInReal,
    #[error("field mismatch between operands")]
    FieldMismatch,
    #[error("malformed rational `{0}`")]
    BadRational(String),
    #[error("non-finite float {0} has no rational value")]
    NonFinite(f64),
    #[error("empty polynomial system")]
    EmptySystem,
    #[error("system entry {0} has degree < 1")]
    ConstantInSystem(usize),
    #[error("system has p = {p} equations in n = {n} variables; need 1 <= p <= n - 1")]
    NotCompleteIntersectionShape { p: usize, n: usize },
    #[error("degree tuple {declared:?} does not match actual degrees {actual:?}")]
    DegreeMismatch { declared: Vec<u32>, actual: Vec<u32> },
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("json: {0}")]
    Json(String),
    #[error("unsupported format_version {0}")]
    Version(u32),
}

/// Scalar field a polynomial is defined over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    Real,
    Complex,
}

/// Exponent vector α ∈ ℕⁿ, ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Exponent(Vec<u32>);

impl Exponent {
    pub fn new(e: Vec<u32>) -> Self {
        Exponent(e)
    }

    pub fn zeros(n: usize) -> Self {
        Exponent(vec![0; n])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    fn add(&self, other: &Exponent) -> Exponent {
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total degree. The zero polynomial has degree −∞, never −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    NegInfinity,
    Finite(u32),
}

impl Degree {
    pub fn finite(self) -> Option<u32> {
        match self {
            Degree::Finite(d) => Some(d),
            Degree::NegInfinity => None,
        }
    }
}

/// Order of vanishing at the origin. The zero germ has infinite multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Multiplicity {
    Finite(u32),
    Infinite,
}

/// One term `a_α x^α`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: Coeff,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    n: usize,
    field: Field,
    terms: BTreeMap<Exponent, Coeff>,
}

impl Poly {
    pub fn zero(n: usize, field: Field) -> Self {
        Poly { n, field, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, field: Field, c: Coeff) -> Self {
        let mut p = Poly::zero(n, field);
        p.add_term(Exponent::zeros(n), c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(n: usize, field: Field, i: usize) -> Self {
        assert!(i < n, "variable index {i} out of range for n = {n}");
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Poly::zero(n, field);
        p.add_term(Exponent(e), Coeff::one());
        p
    }

    pub fn from_terms<I>(n: usize, field: Field, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Coeff)>,
    {
        let mut p = Poly::zero(n, field);
        for (e, c) in terms {
            if e.len() != n {
                return Err(PolyError::DimensionMismatch { expected: n, got: e.len() });
            }
            if field == Field::Real && !c.is_real() {
                return Err(PolyError::ImaginaryInReal);
            }
            p.add_term(Exponent(e), c);
        }
        Ok(p)
    }

    /// Real polynomial from integer-coefficient terms; handy for fixtures.
    pub fn from_int_terms(n: usize, terms: &[(&[u32], i64)]) -> Result<Self, PolyError> {
        Poly::from_terms(n, Field::Real, terms.iter().map(|(e, c)| (e.to_vec(), Coeff::from_int(*c))))
    }

    /// Parses an expression such as `x^2 + y^2 - 1` over the given variable names.
    /// `i` denotes the imaginary unit when `field` is complex.
    pub fn parse(src: &str, vars: &[&str], field: Field) -> Result<Self, PolyError> {
        parse::parse(src, vars, field)
    }

    /// Parses with variables named `x, y, z, w` (n ≤ 4) or `x1..xn`.
    pub fn parse_auto(src: &str, n: usize, field: Field) -> Result<Self, PolyError> {
        let names = parse::default_var_names(n);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        parse::parse(src, &refs, field)
    }

    fn add_term(&mut self, e: Exponent, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(existing) => {
                let sum = &*existing + &c;
                if sum.is_zero() {
                    self.terms.remove(&e);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Coeff)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        self.terms
            .iter()
            .map(|(e, c)| Monomial { exponents: e.0.clone(), coeff: c.clone() })
            .collect()
    }

    pub fn coeff(&self, exponents: &[u32]) -> Coeff {
        self.terms
            .get(&Exponent(exponents.to_vec()))
            .cloned()
            .unwrap_or_else(Coeff::zero)
    }

    pub fn degree(&self) -> Degree {
        // grlex: the last key has maximal total degree
        self.terms
            .keys()
            .next_back()
            .map(|e| Degree::Finite(e.degree()))
            .unwrap_or(Degree::NegInfinity)
    }

    /// Lowest total degree of a stored term; `None` for the zero polynomial.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().next().map(Exponent::degree)
    }

    /// `Some(d)` if every term has total degree `d`. The zero polynomial is not homogeneous.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let lo = self.min_degree()?;
        match self.degree() {
            Degree::Finite(hi) if hi == lo => Some(hi),
            _ => None,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous_degree().is_some()
    }

    /// Component of total degree exactly `k`.
    pub fn homogeneous_part(&self, k: u32) -> Poly {
        Poly {
            n: self.n,
            field: self.field,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.degree() == k)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// `[f_0, f_1, …, f_d]` with `f_k` homogeneous of degree `k` (possibly zero).
    /// The zero polynomial decomposes into the empty list.
    pub fn homogeneous_decompose(&self) -> Vec<Poly> {
        let d = match self.degree() {
            Degree::Finite(d) => d,
            Degree::NegInfinity => return Vec::new(),
        };
        let mut parts = vec![Poly::zero(self.n, self.field); d as usize + 1];
        for (e, c) in &self.terms {
            parts[e.degree() as usize].terms.insert(e.clone(), c.clone());
        }
        parts
    }

    /// Top-degree homogeneous component `f_d`.
    pub fn initial_form(&self) -> Result<Poly, PolyError> {
        match self.degree() {
            Degree::Finite(d) => Ok(self.homogeneous_part(d)),
            Degree::NegInfinity => Err(PolyError::NoInitialForm),
        }
    }

    /// Multiplicity at the origin and the lowest-degree component `ini₀(f)`.
    pub fn initial_form_at_origin(&self) -> (Multiplicity, Poly) {
        match self.min_degree() {
            Some(m) => (Multiplicity::Finite(m), self.homogeneous_part(m)),
            None => (Multiplicity::Infinite, self.clone()),
        }
    }

    /// `Σ_k z^k f_{d−k}` in `n + 1` variables, `z` last.
    pub fn homogenize(&self) -> Result<Poly, PolyError> {
        let d = self.degree().finite().ok_or(PolyError::ZeroHomogenize)?;
        let terms = self.terms.iter().map(|(e, c)| {
            let mut ext = e.0.clone();
            ext.push(d - e.degree());
            (Exponent(ext), c.clone())
        });
        Ok(Poly { n: self.n + 1, field: self.field, terms: terms.collect() })
    }

    /// Substitutes 1 for the last variable, returning a polynomial in `n − 1` variables.
    pub fn dehomogenize(&self) -> Poly {
        assert!(self.n >= 1, "cannot dehomogenize a polynomial in zero variables");
        let mut out = Poly::zero(self.n - 1, self.field);
        for (e, c) in &self.terms {
            out.add_term(Exponent(e.0[..self.n - 1].to_vec()), c.clone());
        }
        out
    }

    /// Appends `k` unused variables after the existing ones.
    pub fn extend_vars(&self, k: usize) -> Poly {
        let terms = self.terms.iter().map(|(e, c)| {
            let mut ext = e.0.clone();
            ext.extend(std::iter::repeat(0).take(k));
            (Exponent(ext), c.clone())
        });
        Poly { n: self.n + k, field: self.field, terms: terms.collect() }
    }

    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n, self.field);
        for (e, c) in &self.terms {
            let k = e.0[i];
            if k == 0 {
                continue;
            }
            let mut de = e.0.clone();
            de[i] -= 1;
            out.add_term(Exponent(de), c.scale(&Rational::from_integer(k.into())));
        }
        out
    }

    /// `(∂₁f, …, ∂ₙf)`.
    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.n).map(|i| self.partial(i)).collect()
    }

    pub fn scale(&self, c: &Coeff) -> Poly {
        let mut out = Poly::zero(self.n, self.field_join(c));
        for (e, a) in &self.terms {
            out.add_term(e.clone(), a * c);
        }
        out
    }

    fn field_join(&self, c: &Coeff) -> Field {
        if c.is_real() {
            self.field
        } else {
            Field::Complex
        }
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut acc = Poly::constant(self.n, self.field, Coeff::one());
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, x: &[Rational]) -> Coeff {
        assert_eq!(x.len(), self.n);
        let mut acc = Coeff::zero();
        for (e, c) in &self.terms {
            let mut m = Rational::one();
            for (xi, &k) in x.iter().zip(&e.0) {
                if k > 0 {
                    m *= num::pow(xi.clone(), k as usize);
                }
            }
            acc = &acc + &c.scale(&m);
        }
        acc
    }

    /// Floating evaluation at a real point; complex polynomials are rejected.
    pub fn eval_f64(&self, x: &[f64]) -> Result<f64, PolyError> {
        if self.field == Field::Complex {
            return Err(PolyError::ComplexInput);
        }
        Ok(NumericPoly::from_poly(self)?.eval(x))
    }

    /// Floating evaluation of a complex polynomial at `z = re + i·im`, by Horner-free
    /// term summation. Used to cross-check realification.
    pub fn eval_complex_f64(&self, re: &[f64], im: &[f64]) -> (f64, f64) {
        let mut acc = (0.0, 0.0);
        for (e, c) in &self.terms {
            let mut m = (1.0, 0.0);
            for (j, &k) in e.0.iter().enumerate() {
                for _ in 0..k {
                    m = (m.0 * re[j] - m.1 * im[j], m.0 * im[j] + m.1 * re[j]);
                }
            }
            let (cr, ci) = (c.re_f64(), c.im_f64());
            acc.0 += cr * m.0 - ci * m.1;
            acc.1 += cr * m.1 + ci * m.0;
        }
        acc
    }

    /// `D f(x)·x − d·f(x)` computed exactly. Zero for homogeneous `f` of degree `d`.
    pub fn euler_residual_exact(&self, x: &[Rational]) -> Result<Coeff, PolyError> {
        let d = self.homogeneous_degree().ok_or(PolyError::NotHomogeneous)?;
        let mut lhs = Coeff::zero();
        for (i, g) in self.gradient().iter().enumerate() {
            lhs = &lhs + &g.eval_exact(x).scale(&x[i]);
        }
        let rhs = self.eval_exact(x).scale(&Rational::from_integer(d.into()));
        Ok(&lhs - &rhs)
    }

    /// Floating Euler residual. Contract: `|r| ≤ 1e−10 (1 + |x|^d)` for homogeneous input.
    pub fn euler_residual(&self, x: &[f64]) -> Result<f64, PolyError> {
        let d = self.homogeneous_degree().ok_or(PolyError::NotHomogeneous)?;
        if self.field == Field::Complex {
            return Err(PolyError::ComplexInput);
        }
        let grad: Result<Vec<f64>, _> = self.gradient().iter().map(|g| g.eval_f64(x)).collect();
        let dot: f64 = grad?.iter().zip(x).map(|(g, xi)| g * xi).sum();
        Ok(dot - d as f64 * self.eval_f64(x)?)
    }

    /// Linear change of variables `x_i ↦ Σ_j m[i][j] y_j`, with `m` of size `n × k`.
    pub fn substitute_linear(&self, m: &[Vec<Rational>]) -> Poly {
        assert_eq!(m.len(), self.n);
        let k = m.first().map(|row| row.len()).unwrap_or(0);
        let forms: Vec<Poly> = m
            .iter()
            .map(|row| {
                let mut p = Poly::zero(k, self.field);
                for (j, a) in row.iter().enumerate() {
                    let mut e = vec![0; k];
                    e[j] = 1;
                    p.add_term(Exponent(e), Coeff::real(a.clone()));
                }
                p
            })
            .collect();
        // cache powers of each linear form
        let mut powers: Vec<Vec<Poly>> = forms
            .iter()
            .map(|f| vec![Poly::constant(k, self.field, Coeff::one()), f.clone()])
            .collect();
        let mut out = Poly::zero(k, self.field);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(k, self.field, c.clone());
            for (i, &ki) in e.0.iter().enumerate() {
                while powers[i].len() <= ki as usize {
                    let next = &powers[i][powers[i].len() - 1] * &forms[i];
                    powers[i].push(next);
                }
                if ki > 0 {
                    term = &term * &powers[i][ki as usize];
                }
            }
            out = &out + &term;
        }
        out
    }

    /// `(Re f, Im f)` after substituting `z_j = x_j + i y_j`, as polynomials in the
    /// interleaved real coordinates `(x_1, y_1, …, x_n, y_n)`.
    pub fn realify_parts(&self) -> Result<(Poly, Poly), PolyError> {
        if self.field == Field::Real {
            return Err(PolyError::AlreadyReal);
        }
        let n2 = 2 * self.n;
        let forms: Vec<Poly> = (0..self.n)
            .map(|j| {
                let mut p = Poly::zero(n2, Field::Complex);
                let mut ex = vec![0; n2];
                ex[2 * j] = 1;
                p.add_term(Exponent(ex), Coeff::one());
                let mut ey = vec![0; n2];
                ey[2 * j + 1] = 1;
                p.add_term(Exponent(ey), Coeff::imag_unit());
                p
            })
            .collect();
        let mut expanded = Poly::zero(n2, Field::Complex);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(n2, Field::Complex, c.clone());
            for (j, &k) in e.0.iter().enumerate() {
                if k > 0 {
                    term = &term * &forms[j].pow(k);
                }
            }
            expanded = &expanded + &term;
        }
        let mut re = Poly::zero(n2, Field::Real);
        let mut im = Poly::zero(n2, Field::Real);
        for (e, c) in expanded.terms {
            re.add_term(e.clone(), Coeff::real(c.re));
            im.add_term(e, Coeff::real(c.im));
        }
        Ok((re, im))
    }

    /// Realification as a two-equation real system in `2n` variables.
    pub fn realify(&self) -> Result<PolySystem, PolyError> {
        let (re, im) = self.realify_parts()?;
        PolySystem::new(vec![re, im])
    }

    /// Forgets the complex tag of a polynomial whose coefficients are all real.
    pub fn as_real(&self) -> Result<Poly, PolyError> {
        if self.terms.values().any(|c| !c.is_real()) {
            return Err(PolyError::ImaginaryInReal);
        }
        Ok(Poly { n: self.n, field: Field::Real, terms: self.terms.clone() })
    }

    /// `|x − c|² − r²` with the exact rational values of the given floats.
    pub fn sphere(center: &[f64], radius: f64) -> Result<Poly, PolyError> {
        let axes: Vec<usize> = (0..center.len()).collect();
        Poly::cylinder(center, &axes, radius)
    }

    /// `Σ_{i ∈ axes} (x_i − c_i)² − r²`.
    pub fn cylinder(center: &[f64], axes: &[usize], radius: f64) -> Result<Poly, PolyError> {
        let n = center.len();
        let r = rational_from_f64(radius)?;
        let mut out = Poly::constant(n, Field::Real, Coeff::real(-(&r * &r)));
        for &i in axes {
            let c = rational_from_f64(center[i])?;
            let shifted = &Poly::var(n, Field::Real, i)
                - &Poly::constant(n, Field::Real, Coeff::real(c));
            out = &out + &(&shifted * &shifted);
        }
        Ok(out)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        assert_eq!(self.n, rhs.n, "ambient dimension mismatch");
        let field = if self.field == Field::Complex || rhs.field == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        };
        let mut out = Poly { n: self.n, field, terms: self.terms.clone() };
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            n: self.n,
            field: self.field,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &(-rhs)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.n, rhs.n, "ambient dimension mismatch");
        let field = if self.field == Field::Complex || rhs.field == Field::Complex {
            Field::Complex
        } else {
            Field::Real
        };
        let mut out = Poly::zero(self.n, field);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                out.add_term(ea.add(eb), ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = parse::default_var_names(self.n);
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mono: Vec<String> = e
                .0
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { names[i].clone() } else { format!("{}^{}", names[i], k) })
                .collect();
            if mono.is_empty() {
                write!(f, "{c}")?;
            } else if *c == Coeff::one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{}*{}", c, mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// `dim H(d, n) = C(d + n − 1, n − 1)`.
pub fn dim_homogeneous(d: u32, n: u32) -> u128 {
    assert!(n >= 1, "need at least one variable");
    let top = (d + n - 1) as u128;
    let k = (n - 1).min(d) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (top - i) / (i + 1);
    }
    acc
}

/// Exact equality check of `Σ parts == f`, used by tests and the acceptance suite.
pub fn sum_polys(n: usize, field: Field, parts: &[Poly]) -> Poly {
    parts.iter().fold(Poly::zero(n, field), |acc, p| &acc + p)
}

/// Point with all coordinates equal to `v`, exact.
pub fn rational_point(xs: &[i64]) -> Vec<Rational> {
    xs.iter().map(|&v| Rational::from_integer(v.into())).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use num::Zero;

    fn p(src: &str, n: usize) -> Poly {
        Poly::parse_auto(src, n, Field::Real).unwrap()
    }

    fn c(src: &str, n: usize) -> Poly {
        Poly::parse_auto(src, n, Field::Complex).unwrap()
    }

    #[test]
    fn decompose_by_degree() {
        let f = p("x^2 + 3*x + 1", 1);
        let parts = f.homogeneous_decompose();
        assert_eq!(parts, vec![p("1", 1), p("3*x", 1), p("x^2", 1)]);
        assert!(Poly::zero(2, Field::Real).homogeneous_decompose().is_empty());

        let g = p("x*y + x^2 + y", 2);
        let parts = g.homogeneous_decompose();
        assert!(parts[0].is_zero());
        assert_eq!(parts[1], p("y", 2));
        assert_eq!(parts[2], p("x*y + x^2", 2));
        assert_eq!(sum_polys(2, Field::Real, &parts), g);
    }

    #[test]
    fn initial_forms() {
        assert_eq!(p("y - x^2", 2).initial_form().unwrap(), p("-x^2", 2));
        assert_eq!(p("x^2 + y^2 - 1", 2).initial_form().unwrap(), p("x^2 + y^2", 2));
        let h = p("x^3 - x*y^2", 2);
        assert_eq!(h.initial_form().unwrap(), h);
        assert_eq!(Poly::zero(2, Field::Real).initial_form(), Err(PolyError::NoInitialForm));
    }

    #[test]
    fn initial_forms_at_origin() {
        let (m, f) = p("x^2 + y^2 + z^3", 3).initial_form_at_origin();
        assert_eq!(m, Multiplicity::Finite(2));
        assert_eq!(f, p("x^2 + y^2", 3));
        let q = p("x^2 + y^2 + z^2", 3);
        assert_eq!(q.initial_form_at_origin(), (Multiplicity::Finite(2), q.clone()));
        assert_eq!(p("5", 2).initial_form_at_origin(), (Multiplicity::Finite(0), p("5", 2)));
        assert_eq!(Poly::zero(2, Field::Real).initial_form_at_origin().0, Multiplicity::Infinite);
    }

    #[test]
    fn zero_degree_is_negative_infinity() {
        assert_eq!(Poly::zero(3, Field::Real).degree(), Degree::NegInfinity);
        assert!(Degree::NegInfinity < Degree::Finite(0));
    }

    #[test]
    fn homogenize_examples() {
        assert_eq!(p("y - x^2", 2).homogenize().unwrap(), p("y*z - x^2", 3));
        let circle = p("x^2 + y^2 - 1", 2);
        let h = circle.homogenize().unwrap();
        assert_eq!(h, p("x^2 + y^2 - z^2", 3));
        assert_eq!(h.dehomogenize(), circle);
        let hom = p("x*y", 2);
        assert_eq!(hom.homogenize().unwrap(), p("x*y", 3));
        assert_eq!(Poly::zero(2, Field::Real).homogenize(), Err(PolyError::ZeroHomogenize));
    }

    #[test]
    fn gradients() {
        assert_eq!(p("x^2 + y^2", 2).gradient(), vec![p("2*x", 2), p("2*y", 2)]);
        assert_eq!(p("x*y", 2).gradient(), vec![p("y", 2), p("x", 2)]);
        assert!(p("7", 3).gradient().iter().all(Poly::is_zero));
    }

    #[test]
    fn euler_identity() {
        let f = p("x^2 + y^2", 2);
        assert!(f.euler_residual_exact(&rational_point(&[1, 2])).unwrap().is_zero());
        let g = p("x^3*y", 2);
        assert!(g.euler_residual_exact(&rational_point(&[2, 1])).unwrap().is_zero());
        let xy = p("x*y", 2);
        assert!(xy.euler_residual(&[0.37, -1.9]).unwrap().abs() < 1e-12);
        assert_eq!(p("x + 1", 1).euler_residual(&[1.0]), Err(PolyError::NotHomogeneous));
    }

    #[test]
    fn realify_examples() {
        let (re, im) = c("x", 1).realify_parts().unwrap();
        assert_eq!(re, p("x1", 2));
        assert_eq!(im, p("x2", 2));

        let (re, im) = c("x^2", 1).realify_parts().unwrap();
        assert_eq!(re, p("x1^2 - x2^2", 2));
        assert_eq!(im, p("2*x1*x2", 2));

        assert_eq!(p("x", 1).realify_parts(), Err(PolyError::AlreadyReal));
    }

    #[test]
    fn realify_product_minus_one_matches_hand_expansion() {
        // (x1 + i y1)(x2 + i y2) − 1 expanded by hand; interleaved order (x1, y1, x2, y2)
        let (re, im) = c("x*y - 1", 2).realify_parts().unwrap();
        let vars = ["x1", "y1", "x2", "y2"];
        let re_hand = Poly::parse("x1*x2 - y1*y2 - 1", &vars, Field::Real).unwrap();
        let im_hand = Poly::parse("x1*y2 + x2*y1", &vars, Field::Real).unwrap();
        assert_eq!(re, re_hand);
        assert_eq!(im, im_hand);
    }

    #[test]
    fn dimension_of_homogeneous_forms() {
        assert_eq!(dim_homogeneous(2, 3), 6);
        assert_eq!(dim_homogeneous(1, 3), 3);
        assert_eq!(dim_homogeneous(2, 3), 2 * dim_homogeneous(1, 3));
        assert_eq!(dim_homogeneous(0, 7), 1);
        assert_eq!(dim_homogeneous(5, 1), 1);
        assert_eq!(dim_homogeneous(3, 4), 20);
    }

    #[test]
    fn linear_substitution_swaps_variables() {
        let f = p("x^2 + y^2 - z^2", 3);
        let one = Rational::one();
        let zero = Rational::zero();
        let swap = vec![
            vec![zero.clone(), zero.clone(), one.clone()],
            vec![zero.clone(), one.clone(), zero.clone()],
            vec![one.clone(), zero.clone(), zero.clone()],
        ];
        assert_eq!(f.substitute_linear(&swap), p("z^2 + y^2 - x^2", 3));
    }

    #[test]
    fn sphere_poly() {
        let s = Poly::sphere(&[1.0, 0.0], 2.0).unwrap();
        assert_eq!(s, p("x^2 - 2*x + y^2 - 3", 2));
    }
}
