//! Small dense helpers over `Vec<f64>` points and nalgebra matrices.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|x| x * k).collect()
}

/// `a + k·b`
pub fn axpy(a: &[f64], k: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + k * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Norm of the wedge of the rows of `j`: `√det(J Jᵀ)`, evaluated as the product
/// of singular values. Zero when the rows are dependent or outnumber the columns.
pub fn wedge_norm_rows(j: &DMatrix<f64>) -> f64 {
    let (p, n) = j.shape();
    if p == 0 {
        return 1.0;
    }
    if p > n {
        return 0.0;
    }
    j.clone().svd(false, false).singular_values.iter().product()
}

/// `det(J Jᵀ)` via LU; the objective minimized by the certificates.
pub fn gram_det(j: &DMatrix<f64>) -> f64 {
    (j * j.transpose()).determinant()
}

/// Orthonormal basis (columns) of the row space of `j`.
pub fn row_space(j: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, n) = j.shape();
    if p == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = j.transpose().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| {
            let s = svd.singular_values[i];
            s > 1e-13 * smax && s > 1e-300
        })
        .collect();
    DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])])
}

/// Component of `v` orthogonal to the row space of `j`, i.e. tangent to the level set.
pub fn project_tangent(j: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let q = row_space(j);
    let vv = DVector::from_column_slice(v);
    let coeffs = q.transpose() * &vv;
    let out = vv - q * coeffs;
    out.iter().cloned().collect()
}

/// Orthonormal basis (columns) of the null space of `j`.
pub fn null_space(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.ncols();
    let q = row_space(j);
    let proj = DMatrix::identity(n, n) - &q * q.transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
}

/// Adjugate of a small square matrix by cofactors.
pub fn adjugate(g: &DMatrix<f64>) -> DMatrix<f64> {
    let p = g.nrows();
    if p == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let mut adj = DMatrix::zeros(p, p);
    for i in 0..p {
        for k in 0..p {
            let minor = g.clone().remove_row(i).remove_column(k);
            let sign = if (i + k) % 2 == 0 { 1.0 } else { -1.0 };
            // adj = transpose of the cofactor matrix
            adj[(k, i)] = sign * minor.determinant();
        }
    }
    adj
}
