#![allow(dead_code)]

use krylov_recycle::{CsrMatrix, DenseMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Sparse nonsymmetric matrix with a dominant diagonal and about `per_row` off-diagonal entries.
pub fn random_sparse(n: usize, per_row: usize, seed: u64) -> CsrMatrix {
    let mut r = rng(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0 + per_row as f64 * r.random_range(0.5..1.0)));
        for _ in 0..per_row {
            t.push((i, r.random_range(0..n), r.random_range(-1.0..1.0)));
        }
    }
    CsrMatrix::from_triplets(n, t).unwrap()
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Dense LU direct solve.
pub fn direct_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let lu = to_na(&a.to_dense()).lu();
    lu.solve(&DVector::from_column_slice(b)).expect("nonsingular").as_slice().to_vec()
}

pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let n: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    d / n
}

pub fn true_rel_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.spmv_into(x, &mut ax);
    let r: f64 = b.iter().zip(&ax).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cycle-end true residuals recorded in a history (the initial row excluded).
pub fn cycle_ends(h: &[krylov_recycle::HistoryRow]) -> Vec<f64> {
    h.iter().filter(|r| r.iteration > 0).filter_map(|r| r.true_residual_rel).collect()
}

/// Saw-tooth right-hand side used throughout the solver tests.
pub fn saw(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect()
}
