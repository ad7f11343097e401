//! Level-1 kernels on plain slices, plus products of column bases with small matrices.

use crate::dense::DenseMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `sum_j coeffs[j] * basis[j]`, with `n` the vector length (needed when the basis is empty).
pub fn combine(basis: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    debug_assert!(coeffs.len() <= basis.len());
    let mut out = vec![0.0; n];
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            axpy(c, b, &mut out);
        }
    }
    out
}

/// Columns of `basis * p`, where `basis` holds `p.rows()` vectors of length `n`.
pub fn basis_times(basis: &[Vec<f64>], p: &DenseMatrix, n: usize) -> Vec<Vec<f64>> {
    assert!(basis.len() >= p.rows(), "basis narrower than coefficient matrix");
    (0..p.cols())
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, b) in basis.iter().take(p.rows()).enumerate() {
                let c = p[(i, j)];
                if c != 0.0 {
                    axpy(c, b, &mut out);
                }
            }
            out
        })
        .collect()
}

/// `aᵀ b` for two column bases.
pub fn gram(a: &[Vec<f64>], b: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]))
}

/// `basisᵀ v`
pub fn project(basis: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    basis.iter().map(|b| dot(b, v)).collect()
}

/// Largest deviation of `basisᵀ basis` from the identity, measured in Frobenius norm.
pub fn orthonormality_error(basis: &[Vec<f64>]) -> f64 {
    let g = gram(basis, basis);
    g.sub(&DenseMatrix::identity(basis.len())).frobenius_norm()
}
