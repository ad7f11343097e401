//! Shared fixtures for the criterion benches.

use krylov_recycle::operators::gen_convection_diffusion;
use krylov_recycle::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upwind convection-diffusion operator on a `grid x grid` mesh at Péclet number 30.
pub fn operator(grid: usize) -> CsrMatrix {
    gen_convection_diffusion(grid, grid, 30.0)
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `count` orthonormal columns of length `n`.
pub fn orthonormal(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for j in 0..count {
        let mut v = random_vec(n, seed + j as u64);
        for q in &out {
            let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
        }
        let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= s);
        out.push(v);
    }
    out
}

/// Slowly drifting right-hand sides `b₀ + 0.5^i e_i`.
pub fn drifting_sequence(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let base = random_vec(n, seed);
    (0..count)
        .map(|i| {
            let e = random_vec(n, seed + 1 + i as u64);
            let s = 0.5f64.powi(i as i32);
            (base.iter().zip(&e).map(|(b, x)| b + s * x).collect(), vec![0.0; n])
        })
        .collect()
}
