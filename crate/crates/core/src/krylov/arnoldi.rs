use super::{SolverError, BREAKDOWN_TOL};
use crate::dense::DenseMatrix;
use crate::operators::{LinearOperator, Preconditioner};
use crate::vecops::{axpy, dot, norm, orthonormality_error, scale, sub};

/// Output of one flexible Arnoldi step.
pub(crate) struct Step {
    pub z: Vec<f64>,
    /// Column of `H̄`, length `j + 2`.
    pub h: Vec<f64>,
    /// Coefficients against the recycled image space `C`.
    pub b: Vec<f64>,
    pub breakdown: bool,
}

/// Appends `v_{j+1}` to `v`, orthogonalizing `A·M(v_j)` first against `C` and then
/// against `v` with modified Gram-Schmidt (twice when `reorth`).
pub(crate) fn arnoldi_step(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    v: &mut Vec<Vec<f64>>,
    c: &[Vec<f64>],
    reorth: bool,
) -> Step {
    let j = v.len() - 1;
    let z = p.apply(a, &v[j]);
    let mut w = a.apply_vec(&z);
    let wnorm = norm(&w);
    let mut b = vec![0.0; c.len()];
    let mut h = vec![0.0; j + 2];
    for _ in 0..if reorth { 2 } else { 1 } {
        for (bi, ci) in b.iter_mut().zip(c) {
            let t = dot(ci, &w);
            axpy(-t, ci, &mut w);
            *bi += t;
        }
        for (hi, vi) in h.iter_mut().zip(v.iter()) {
            let t = dot(vi, &w);
            axpy(-t, vi, &mut w);
            *hi += t;
        }
    }
    let hn = norm(&w);
    let breakdown = hn == 0.0 || hn <= BREAKDOWN_TOL * wnorm;
    if !breakdown {
        scale(1.0 / hn, &mut w);
        v.push(w);
        h[j + 1] = hn;
    }
    Step { z, h, b, breakdown }
}

/// Basis, Hessenberg matrix and right-hand side produced by one Arnoldi cycle.
#[derive(Debug, Clone)]
pub struct ArnoldiState {
    /// `j + 1` orthonormal vectors, or `j` after a happy breakdown.
    pub v: Vec<Vec<f64>>,
    /// Preconditioned directions `z_i = M_i(v_i)`, kept in flexible mode.
    pub z: Option<Vec<Vec<f64>>>,
    /// `(j+1) x j` upper Hessenberg matrix.
    pub hbar: DenseMatrix,
    /// Least-squares right-hand side, `βe₁` for a fresh cycle.
    pub c: Vec<f64>,
    /// Step at which an invariant subspace was found.
    pub breakdown: Option<usize>,
}

impl ArnoldiState {
    pub fn width(&self) -> usize {
        self.hbar.cols()
    }

    /// `‖A Z − V H̄‖_F`, treating a missing trailing basis vector as zero.
    pub fn relation_residual(&self, a: &dyn LinearOperator) -> f64 {
        let z = self.z.as_ref().expect("flexible state keeps Z");
        relation_residual(a, z, &self.v, &self.hbar)
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.v)
    }
}

pub(crate) fn relation_residual(a: &dyn LinearOperator, z: &[Vec<f64>], v: &[Vec<f64>], hbar: &DenseMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for (j, zj) in z.iter().enumerate().take(hbar.cols()) {
        let az = a.apply_vec(zj);
        let mut vh = vec![0.0; n];
        for (i, vi) in v.iter().enumerate().take(hbar.rows()) {
            axpy(hbar[(i, j)], vi, &mut vh);
        }
        acc += sub(&az, &vh).iter().map(|x| x * x).sum::<f64>();
    }
    acc.sqrt()
}

/// `m` steps of flexible Arnoldi from `r0`, keeping `Z`.
pub fn fgmres_cycle(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    r0: &[f64],
    m: usize,
    reorth: bool,
) -> Result<ArnoldiState, SolverError> {
    let beta = norm(r0);
    if beta == 0.0 {
        return Err(SolverError::InvalidParameter("initial residual is zero".into()));
    }
    let mut v0 = r0.to_vec();
    scale(1.0 / beta, &mut v0);
    let mut v = vec![v0];
    let mut z = Vec::with_capacity(m);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut breakdown = None;
    for j in 0..m {
        let step = arnoldi_step(a, p, &mut v, &[], reorth);
        z.push(step.z);
        cols.push(step.h);
        if step.breakdown {
            breakdown = Some(j + 1);
            break;
        }
    }
    let width = cols.len();
    let hbar = DenseMatrix::from_fn(width + 1, width, |i, jj| cols[jj].get(i).copied().unwrap_or(0.0));
    let mut c = vec![0.0; width + 1];
    c[0] = beta;
    Ok(ArnoldiState { v, z: Some(z), hbar, c, breakdown })
}

/// Result of Arnoldi on `(I − CCᵀ)A`.
#[derive(Debug, Clone)]
pub struct ProjectedArnoldi {
    pub v: Vec<Vec<f64>>,
    pub z: Option<Vec<Vec<f64>>>,
    /// `(j+1) x j`
    pub hbar: DenseMatrix,
    /// `k x j` block `Cᵀ A Z`.
    pub b: DenseMatrix,
    pub breakdown: Option<usize>,
}

/// `steps` Arnoldi steps with every new vector first orthogonalized against `C`.
pub fn arnoldi_projected(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    r_start: &[f64],
    steps: usize,
    c: &[Vec<f64>],
    reorth: bool,
) -> Result<ProjectedArnoldi, SolverError> {
    let beta = norm(r_start);
    if beta == 0.0 {
        return Err(SolverError::InvalidParameter("starting vector is zero".into()));
    }
    let mut v0 = r_start.to_vec();
    scale(1.0 / beta, &mut v0);
    let mut v = vec![v0];
    let mut z = Vec::with_capacity(steps);
    let mut hcols = Vec::with_capacity(steps);
    let mut bcols = Vec::with_capacity(steps);
    let mut breakdown = None;
    for j in 0..steps {
        let step = arnoldi_step(a, p, &mut v, c, reorth);
        z.push(step.z);
        hcols.push(step.h);
        bcols.push(step.b);
        if step.breakdown {
            breakdown = Some(j + 1);
            break;
        }
    }
    let width = hcols.len();
    let hbar = DenseMatrix::from_fn(width + 1, width, |i, j| hcols[j].get(i).copied().unwrap_or(0.0));
    let b = DenseMatrix::from_fn(c.len(), width, |i, j| bcols[j][i]);
    Ok(ProjectedArnoldi { v, z: Some(z), hbar, b, breakdown })
}
