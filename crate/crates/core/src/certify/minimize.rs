//! Multistart Riemannian L-BFGS on `Z(constraints) ∩ region`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::{adjugate, axpy, dot, norm, project_tangent, sub};
use crate::polyring::NumericSystem;
use crate::sampler::{project_free, ProjectOptions, Region};

/// Function minimized over the manifold.
#[derive(Clone, Debug)]
pub enum Objective {
    /// `det(J Jᵀ)` where `J` stacks the Jacobian of `sys` at `(x, 0,…,0)`
    /// (`pad` trailing zeros) and the constant `extra_rows`.
    Wedge { sys: NumericSystem, pad: usize, extra_rows: Vec<Vec<f64>> },
    /// `Σ fᵢ(x)²`
    SumSquares { sys: NumericSystem },
}

impl Objective {
    pub fn wedge(sys: NumericSystem) -> Self {
        Objective::Wedge { sys, pad: 0, extra_rows: Vec::new() }
    }

    fn padded(x: &[f64], pad: usize) -> Vec<f64> {
        let mut v = x.to_vec();
        v.extend(std::iter::repeat_n(0.0, pad));
        v
    }

    fn stacked(sys: &NumericSystem, xp: &[f64], extra: &[Vec<f64>]) -> DMatrix<f64> {
        let j = sys.jacobian(xp);
        let (p, m) = j.shape();
        DMatrix::from_fn(p + extra.len(), m, |i, k| if i < p { j[(i, k)] } else { extra[i - p][k] })
    }

    /// The raw value: `det(J Jᵀ)` or the sum of squares.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Wedge { sys, pad, extra_rows } => {
                let j = Self::stacked(sys, &Self::padded(x, *pad), extra_rows);
                crate::linalg::gram_det(&j)
            }
            Objective::SumSquares { sys } => sys.values(x).iter().map(|v| v * v).sum(),
        }
    }

    /// `√value`: the wedge norm, or the residual norm.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Wedge { sys, pad, extra_rows } => {
                crate::linalg::wedge_norm_rows(&Self::stacked(sys, &Self::padded(x, *pad), extra_rows))
            }
            Objective::SumSquares { .. } => self.value(x).max(0.0).sqrt(),
        }
    }

    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        match self {
            Objective::Wedge { sys, pad, extra_rows } => {
                let xp = Self::padded(x, *pad);
                let j = Self::stacked(sys, &xp, extra_rows);
                let g = &j * j.transpose();
                let adj = adjugate(&g);
                let value = g.determinant();
                let mut grad = DVector::zeros(n + pad);
                // ∇ det(JJᵀ) = 2 Σᵢ Hᵢ wᵢ with wᵢ = Σⱼ adj(G)ᵢⱼ Jⱼᵀ; constant rows have no Hessian
                for i in 0..sys.p() {
                    let w = (adj.row(i) * &j).transpose();
                    grad += sys.hessian(i, &xp) * w * 2.0;
                }
                (value, grad.iter().take(n).cloned().collect())
            }
            Objective::SumSquares { sys } => {
                let f = sys.values(x);
                let j = sys.jacobian(x);
                let grad = j.transpose() * DVector::from_column_slice(&f) * 2.0;
                (f.iter().map(|v| v * v).sum(), grad.iter().cloned().collect())
            }
        }
    }
}

/// `Z(constraints) ∩ region`; an empty constraint set means the region itself.
#[derive(Clone, Debug)]
pub struct Manifold {
    pub constraints: Option<NumericSystem>,
    pub region: Option<Region>,
    pub tol: f64,
}

impl Manifold {
    fn tangent(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match &self.constraints {
            Some(c) => project_tangent(&c.jacobian(x), v),
            None => v.to_vec(),
        }
    }

    fn retract(&self, x: &[f64]) -> Option<Vec<f64>> {
        let y = match &self.constraints {
            Some(c) => {
                let opts = ProjectOptions { tol: self.tol, max_iters: 50, refine_foot: false };
                project_free(x, c, &vec![true; x.len()], &opts).ok()?.point
            }
            None => x.to_vec(),
        };
        match &self.region {
            Some(r) if !r.contains(&y) => None,
            _ => Some(y),
        }
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.constraints.as_ref().map(|c| c.max_residual(x)).unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    pub memory: usize,
    /// Stop once `√value` falls below this (nothing left to resolve).
    pub floor: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iters: 200, memory: 6, floor: 1e-13 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalMin {
    pub start: usize,
    pub point: Vec<f64>,
    pub magnitude: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// L-BFGS with tangent projection as vector transport and Newton projection as retraction.
pub fn minimize(obj: &Objective, man: &Manifold, x0: &[f64], opts: &MinimizeOptions) -> (Vec<f64>, usize) {
    let mut x = x0.to_vec();
    let (mut f, g) = obj.value_grad(&x);
    let mut rg = man.tangent(&x, &g);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iters = 0;
    let len_scale = norm(&x).max(1.0);
    while iters < opts.max_iters {
        if f.max(0.0).sqrt() <= opts.floor {
            break;
        }
        let gn = norm(&rg);
        if gn <= 1e-15 * (1.0 + f.abs()) {
            break;
        }
        iters += 1;
        // two-loop recursion on vectors re-projected to the current tangent space
        let mut q = rg.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q = axpy(&q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            q = crate::linalg::scale(&q, dot(s, y) / dot(y, y));
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q = axpy(&q, a - b, s);
        }
        let mut d = man.tangent(&x, &crate::linalg::scale(&q, -1.0));
        if dot(&d, &rg) >= 0.0 {
            d = crate::linalg::scale(&rg, -1.0);
            mem.clear();
        }
        let dn = norm(&d);
        let mut t = if mem.is_empty() { (0.1 * len_scale / dn).min(1.0) } else { 1.0 };
        let slope = dot(&rg, &d);
        let mut next = None;
        for _ in 0..40 {
            if let Some(xt) = man.retract(&axpy(&x, t, &d)) {
                let ft = obj.value(&xt);
                if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                    next = Some((xt, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, _)) = next else { break };
        let (fn_, gn_) = obj.value_grad(&xn);
        let rg_new = man.tangent(&xn, &gn_);
        let s = sub(&xn, &x);
        let y = sub(&rg_new, &man.tangent(&xn, &rg));
        let sy = dot(&s, &y);
        mem = mem.into_iter().map(|(a, b, r)| (man.tangent(&xn, &a), man.tangent(&xn, &b), r)).collect();
        if sy > 1e-300 && sy.is_finite() {
            mem.push_back((s, y, 1.0 / sy));
            if mem.len() > opts.memory {
                mem.pop_front();
            }
        }
        let stalled = (f - fn_).abs() <= 1e-16 * f.abs().max(1e-300);
        x = xn;
        f = fn_;
        rg = rg_new;
        if stalled {
            break;
        }
    }
    (x, iters)
}

/// Minimizes from every start in parallel; results keep the start order.
pub fn multistart(obj: &Objective, man: &Manifold, starts: &[Vec<f64>], opts: &MinimizeOptions) -> Vec<LocalMin> {
    starts
        .par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let (x, iterations) = minimize(obj, man, x0, opts);
            // keep the start if the descent somehow ended higher
            let (point, magnitude) = {
                let m1 = obj.magnitude(&x);
                let m0 = obj.magnitude(x0);
                if m1 <= m0 {
                    (x, m1)
                } else {
                    (x0.clone(), m0)
                }
            };
            LocalMin { start: k, residual: man.residual(&point), point, magnitude, iterations }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyring::{Field, PolySystem};

    fn num(exprs: &[&str], n: usize) -> NumericSystem {
        PolySystem::parse(exprs, n, Field::Real).unwrap().numeric().unwrap()
    }

    #[test]
    fn wedge_gradient_matches_finite_differences() {
        let sys = num(&["x^2*y - z^3 + x*z", "x + y^2 - 2*z"], 3);
        let obj = Objective::Wedge { sys, pad: 0, extra_rows: vec![] };
        let x = [0.3, -0.7, 0.5];
        let (_, g) = obj.value_grad(&x);
        for k in 0..3 {
            let h = 1e-6;
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn padded_wedge_gradient() {
        let sys = num(&["x*w - y^2 + z^2"], 4);
        let obj = Objective::Wedge { sys, pad: 1, extra_rows: vec![vec![0.0, 0.0, 0.0, 1.0]] };
        let x = [0.3, -0.7, 0.5];
        let (_, g) = obj.value_grad(&x);
        for k in 0..3 {
            let h = 1e-6;
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn finds_cone_apex() {
        let sys = num(&["x^2 + y^2 - z^2"], 3);
        let man = Manifold { constraints: Some(sys.clone()), region: Some(Region::ball(3, 1.0)), tol: 1e-10 };
        let obj = Objective::wedge(sys);
        let s = 0.5f64.sqrt();
        let (x, _) = minimize(&obj, &man, &[0.3 * s, 0.3 * s, 0.3], &MinimizeOptions::default());
        assert!(obj.magnitude(&x) < 1e-9, "{x:?}");
    }
}
