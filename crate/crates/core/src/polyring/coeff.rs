use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use super::PolyError;

pub type Rational = BigRational;

/// Exact coefficient: a pair of rationals `re + i·im`. Real polynomials keep `im == 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coeff {
    pub re: Rational,
    pub im: Rational,
}

impl Coeff {
    pub fn new(re: Rational, im: Rational) -> Self {
        Coeff { re, im }
    }

    pub fn real(re: Rational) -> Self {
        Coeff { re, im: Rational::zero() }
    }

    pub fn from_int(v: i64) -> Self {
        Coeff::real(Rational::from_integer(BigInt::from(v)))
    }

    pub fn imag_unit() -> Self {
        Coeff { re: Rational::zero(), im: Rational::one() }
    }

    pub fn zero() -> Self {
        Coeff::real(Rational::zero())
    }

    pub fn one() -> Self {
        Coeff::real(Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn scale(&self, k: &Rational) -> Coeff {
        Coeff { re: &self.re * k, im: &self.im * k }
    }

    /// Inverse of a nonzero coefficient.
    pub fn inv(&self) -> Option<Coeff> {
        let norm = &self.re * &self.re + &self.im * &self.im;
        if norm.is_zero() {
            return None;
        }
        Some(Coeff { re: &self.re / &norm, im: -(&self.im / &norm) })
    }

    pub fn re_f64(&self) -> f64 {
        self.re.to_f64().unwrap_or(f64::NAN)
    }

    pub fn im_f64(&self) -> f64 {
        self.im.to_f64().unwrap_or(f64::NAN)
    }
}

impl Add for &Coeff {
    type Output = Coeff;
    fn add(self, rhs: &Coeff) -> Coeff {
        Coeff { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &Coeff {
    type Output = Coeff;
    fn sub(self, rhs: &Coeff) -> Coeff {
        Coeff { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul for &Coeff {
    type Output = Coeff;
    fn mul(self, rhs: &Coeff) -> Coeff {
        if self.im.is_zero() && rhs.im.is_zero() {
            return Coeff::real(&self.re * &rhs.re);
        }
        Coeff {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

impl Neg for &Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        Coeff { re: -&self.re, im: -&self.im }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", self.re)
        } else if self.re.is_zero() {
            write!(f, "{}i", self.im)
        } else {
            let sign = if self.im.is_negative() { "-" } else { "+" };
            write!(f, "({} {} {}i)", self.re, sign, self.im.abs())
        }
    }
}

/// Serializes a rational as `"p/q"` (always with an explicit denominator).
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<Rational, PolyError> {
    let bad = || PolyError::BadRational(s.to_string());
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(p))
        }
    }
}

/// Exact rational value of a finite double.
pub fn rational_from_f64(v: f64) -> Result<Rational, PolyError> {
    Rational::from_float(v).ok_or(PolyError::NonFinite(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_strings() {
        let q = parse_rational("-6/4").unwrap();
        assert_eq!(format_rational(&q), "-3/2");
        assert_eq!(format_rational(&parse_rational("7").unwrap()), "7/1");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn complex_mul_and_inverse() {
        let a = Coeff::new(Rational::from_integer(1.into()), Rational::from_integer(2.into()));
        let b = a.inv().unwrap();
        assert_eq!(&a * &b, Coeff::one());
        let i = Coeff::imag_unit();
        assert_eq!(&i * &i, Coeff::from_int(-1));
    }

    #[test]
    fn float_to_rational_is_exact() {
        let q = rational_from_f64(0.1).unwrap();
        assert_eq!(q.to_f64().unwrap(), 0.1);
        assert!(rational_from_f64(f64::NAN).is_err());
    }
}
