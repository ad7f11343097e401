use num_complex::Complex64;

use super::{SolverError, Strategy};
use crate::dense::DenseMatrix;
use crate::smallalg::{reduced_qr, small_generalized_eig, small_standard_eig, EigenPairSet, LuFactorization, SmallAlgError};
use crate::vecops::dot;

/// Deflation data extracted from a finished cycle.
#[derive(Debug, Clone)]
pub struct DeflationSubspace {
    /// `j x k` real basis of the selected eigenvectors.
    pub pk: DenseMatrix,
    /// `(j+1) x (k+1)` orthonormal basis `P̄_{k+1}` with `H̄ P̄_k ⊂ range(P̄_{k+1})`.
    pub pk1: DenseMatrix,
    /// Orthonormal `j x k` basis `P̄_k` of `range(P_k)`.
    pub pk_orth: DenseMatrix,
    /// `H_j⁻ᵀ e_j`
    pub f: Vec<f64>,
    /// `h_{j+1,j}`
    pub delta: f64,
    pub values: Vec<Complex64>,
    pub strategy: Strategy,
}

impl DeflationSubspace {
    pub fn k(&self) -> usize {
        self.pk.cols()
    }

    pub fn pk_bar(&self) -> DenseMatrix {
        self.pk_orth.clone()
    }
}

/// Square part, `f = H⁻ᵀe_j` and `δ = h_{j+1,j}` of a `(j+1) x j` Hessenberg-like matrix.
pub(crate) fn square_part(hbar: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, f64), SolverError> {
    let j = hbar.cols();
    let h = hbar.block(0, j, 0, j);
    let delta = hbar[(j, j - 1)];
    let lu = LuFactorization::new(&h).map_err(|_| SolverError::SingularHm)?;
    let mut e = vec![0.0; j];
    e[j - 1] = 1.0;
    let f = lu.solve_transpose(&e);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SingularHm);
    }
    Ok((h, f, delta))
}

/// `H + δ² f e_jᵀ`
pub(crate) fn corrected(h: &DenseMatrix, f: &[f64], delta: f64) -> DenseMatrix {
    let j = h.cols();
    let mut hh = h.clone();
    for (i, fi) in f.iter().enumerate() {
        hh[(i, j - 1)] += delta * delta * fi;
    }
    hh
}

/// Orthonormalizes `[[P_k, −δf], [0, 1]]`, dropping columns of `P_k` that collapse.
pub(crate) fn augment(pk: DenseMatrix, f: &[f64], delta: f64) -> Result<(DenseMatrix, DenseMatrix), SolverError> {
    let mut pk = pk;
    loop {
        let (j, k) = pk.shape();
        let mut p = DenseMatrix::zeros(j + 1, k + 1);
        p.set_block(0, 0, &pk);
        for (i, fi) in f.iter().enumerate() {
            p[(i, k)] = -delta * fi;
        }
        p[(j, k)] = 1.0;
        match reduced_qr(&p) {
            Ok((q, _)) => return Ok((pk, q)),
            Err(SmallAlgError::RankDeficient { column }) if column < k => {
                log::warn!("deflation basis lost rank at column {column}; shrinking to {}", k - 1);
                pk = drop_column(&pk, column);
            }
            Err(e) => return Err(e.into()),
        }
    }
}

pub(crate) fn drop_column(m: &DenseMatrix, col: usize) -> DenseMatrix {
    let keep: Vec<usize> = (0..m.cols()).filter(|&c| c != col).collect();
    DenseMatrix::from_fn(m.rows(), keep.len(), |i, j| m[(i, keep[j])])
}

/// Orthonormalizes `[H̄ P̄_k, [−δf; 1]]`. The last column is orthogonal to `range(H̄)`,
/// so the compacted relation `A Z P̄_k = V P̄_{k+1} H̄_k` holds for any `P_k`.
fn augment_image(
    hbar: &DenseMatrix,
    pk: DenseMatrix,
    f: &[f64],
    delta: f64,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix), SolverError> {
    let mut pk = pk;
    loop {
        let (j, k) = pk.shape();
        let fail = match reduced_qr(&pk) {
            Ok((pko, _)) => {
                let mut p = DenseMatrix::zeros(j + 1, k + 1);
                p.set_block(0, 0, &hbar.matmul(&pko));
                for (i, fi) in f.iter().enumerate() {
                    p[(i, k)] = -delta * fi;
                }
                p[(j, k)] = 1.0;
                match reduced_qr(&p) {
                    Ok((q, _)) => return Ok((pk, pko, q)),
                    Err(e) => e,
                }
            }
            Err(e) => e,
        };
        match fail {
            SmallAlgError::RankDeficient { column } if column < k => {
                log::warn!("deflation basis lost rank at column {column}; shrinking to {}", k - 1);
                pk = drop_column(&pk, column);
            }
            e => return Err(e.into()),
        }
    }
}

fn finish(
    hbar: &DenseMatrix,
    set: EigenPairSet,
    f: Vec<f64>,
    delta: f64,
    strategy: Strategy,
) -> Result<DeflationSubspace, SolverError> {
    let values = set.values.clone();
    let (pk, pk_orth, pk1) = match strategy {
        Strategy::A => augment_image(hbar, set.vectors, &f, delta)?,
        _ => {
            let (pk, pk1) = augment(set.vectors, &f, delta)?;
            let j = pk1.rows() - 1;
            let pko = pk1.block(0, j, 0, pk.cols());
            (pk, pko, pk1)
        }
    };
    Ok(DeflationSubspace { values: values[..pk.cols()].to_vec(), pk, pk1, pk_orth, f, delta, strategy })
}

/// Harmonic Ritz pairs through the standard problem `(H + δ²f e_jᵀ) g = λ g`.
///
/// At most `j − 1` vectors are kept so that a deflated cycle can still extend the basis.
pub fn harmonic_ritz_standard(hbar: &DenseMatrix, k: usize) -> Result<DeflationSubspace, SolverError> {
    let j = hbar.cols();
    let (h, f, delta) = square_part(hbar)?;
    let hh = corrected(&h, &f, delta);
    let set = small_standard_eig(&hh, j)?.truncate(k.min(j - 1), j - 1);
    finish(hbar, set, f, delta, Strategy::B)
}

/// Harmonic Ritz pairs of `A` with respect to `range(Z)`:
/// `(H + δ²f e_jᵀ) g = λ [I δf] VᵀZ g`, with `vtz` the `(j+1) x j` product `VᵀZ`.
pub fn harmonic_ritz_strategy_a(
    hbar: &DenseMatrix,
    vtz: &DenseMatrix,
    k: usize,
) -> Result<DeflationSubspace, SolverError> {
    let j = hbar.cols();
    if vtz.shape() != (j + 1, j) {
        return Err(SolverError::InvalidParameter(format!("VᵀZ must be {}x{j}, got {:?}", j + 1, vtz.shape())));
    }
    let (h, f, delta) = square_part(hbar)?;
    let hh = corrected(&h, &f, delta);
    let rm = DenseMatrix::from_fn(j, j, |i, c| vtz[(i, c)] + delta * f[i] * vtz[(j, c)]);
    let set = small_generalized_eig(&hh, &rm, j)?.truncate(k.min(j - 1), j - 1);
    finish(hbar, set, f, delta, Strategy::A)
}

/// `P̄ᵀ_{k+1} (VᵀZ) P̄_k`, the leading block of `VᵀZ` after a deflated restart.
pub fn vtz_leading_block(defl: &DeflationSubspace, vtz: &DenseMatrix) -> DenseMatrix {
    defl.pk1.tr_matmul(&vtz.matmul(&defl.pk_bar()))
}

/// Direction `(−δf, 1)` and coefficient with `c − H̄y = direction · scale` for the
/// least-squares minimizer `y`.
pub fn rollin_restart_vector(hbar: &DenseMatrix, c: &[f64]) -> Result<(Vec<f64>, f64), SolverError> {
    let j = hbar.cols();
    if c.len() != j + 1 {
        return Err(SolverError::InvalidParameter("right-hand side length must be j+1".into()));
    }
    let (_, f, delta) = square_part(hbar)?;
    let mut w: Vec<f64> = f.iter().map(|v| -delta * v).collect();
    w.push(1.0);
    let omega = c[j];
    let scale = (omega - delta * dot(&f, &c[..j])) / (1.0 + delta * delta * dot(&f, &f));
    Ok((w, scale))
}
