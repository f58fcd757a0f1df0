use nalgebra::DMatrix;

use super::{Field, Poly, PolyError};

/// Real polynomial compiled to `f64` coefficients for fast evaluation.
#[derive(Clone, Debug)]
pub struct NumericPoly {
    n: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

impl NumericPoly {
    pub fn from_poly(p: &Poly) -> Result<Self, PolyError> {
        if p.field() == Field::Complex {
            return Err(PolyError::ComplexInput);
        }
        let terms = p.terms().map(|(e, c)| (e.to_vec(), c.re_f64())).collect();
        Ok(NumericPoly { n: p.n(), terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (xi, &k) in x.iter().zip(e) {
                match k {
                    0 => {}
                    1 => m *= xi,
                    2 => m *= xi * xi,
                    _ => m *= xi.powi(k as i32),
                }
            }
            acc += m;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// A real system with compiled first and second derivatives.
#[derive(Clone, Debug)]
pub struct NumericSystem {
    n: usize,
    values: Vec<NumericPoly>,
    jac: Vec<Vec<NumericPoly>>,
    // hess[i][k][m] = ∂_k ∂_m f_i, only k <= m stored in the upper triangle
    hess: Vec<Vec<Vec<NumericPoly>>>,
}

impl NumericSystem {
    pub fn from_polys(polys: &[Poly]) -> Result<Self, PolyError> {
        let n = polys.first().map(Poly::n).ok_or(PolyError::EmptySystem)?;
        let mut values = Vec::new();
        let mut jac = Vec::new();
        let mut hess = Vec::new();
        for p in polys {
            if p.n() != n {
                return Err(PolyError::DimensionMismatch { expected: n, got: p.n() });
            }
            values.push(NumericPoly::from_poly(p)?);
            let grad = p.gradient();
            let mut h = Vec::with_capacity(n);
            for (k, g) in grad.iter().enumerate() {
                let row: Result<Vec<NumericPoly>, _> =
                    (0..n).map(|m| if m < k { Ok(empty(n)) } else { NumericPoly::from_poly(&g.partial(m)) }).collect();
                h.push(row?);
            }
            let j: Result<Vec<NumericPoly>, _> = grad.iter().map(NumericPoly::from_poly).collect();
            jac.push(j?);
            hess.push(h);
        }
        Ok(NumericSystem { n, values, jac, hess })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.values.iter().map(|f| f.eval(x)).collect()
    }

    /// `max_i |f_i(x)|`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.values.iter().map(|f| f.eval(x).abs()).fold(0.0, f64::max)
    }

    /// `p × n` Jacobian.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.p(), self.n, |i, k| self.jac[i][k].eval(x))
    }

    /// Hessian of equation `i` at `x`.
    pub fn hessian(&self, i: usize, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for k in 0..self.n {
            for m in k..self.n {
                let v = self.hess[i][k][m].eval(x);
                h[(k, m)] = v;
                h[(m, k)] = v;
            }
        }
        h
    }
}

fn empty(n: usize) -> NumericPoly {
    NumericPoly { n, terms: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_and_hessian_of_cone() {
        let f = Poly::parse_auto("x^2 + y^2 - z^2 + z^4", 3, Field::Real).unwrap();
        let s = NumericSystem::from_polys(&[f]).unwrap();
        let x = [0.3, -0.2, 0.5];
        let j = s.jacobian(&x);
        assert!((j[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((j[(0, 2)] - (-1.0 + 4.0 * 0.125)).abs() < 1e-15);
        let h = s.hessian(0, &x);
        assert!((h[(2, 2)] - (-2.0 + 12.0 * 0.25)).abs() < 1e-15);
        assert_eq!(h[(0, 1)], 0.0);
    }

    #[test]
    fn complex_rejected() {
        let f = Poly::parse_auto("x", 1, Field::Complex).unwrap();
        assert!(NumericSystem::from_polys(&[f]).is_err());
    }
}
