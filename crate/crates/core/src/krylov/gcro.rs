use num_complex::Complex64;

use super::deflation::{corrected, drop_column, square_part};
use super::SolverError;
use crate::dense::DenseMatrix;
use crate::operators::{LinearOperator, Preconditioner};
use crate::smallalg::{
    assemble, full_eig, invert_upper, reduced_qr, small_generalized_eig, EigOptions, EigenPairSet, IncrementalLsq,
    SmallAlgError,
};
use crate::vecops::{axpy, basis_times, combine, norm, project, sub};

/// Recycled pair with `A·M(U) = C` (`A·Z = C` in flexible form).
#[derive(Debug, Clone)]
pub struct RecycleSpace {
    /// Orthonormal image basis.
    pub c: Vec<Vec<f64>>,
    /// Solution-space basis: preconditioned-variable `U`, or `Z` when flexible.
    pub u: Vec<Vec<f64>>,
    /// `1/‖u_i‖`, so that `Ũ = U·diag(d)` has unit columns; all ones when flexible.
    pub d: Vec<f64>,
    pub flexible: bool,
    /// Cached `k x k` product of `C` with the scaled solution basis (or with `W`).
    pub head: DenseMatrix,
    /// Auxiliary basis `W_k` of strategy C.
    pub w: Option<Vec<Vec<f64>>>,
    /// `(system index, cycle index)` of the cycle that produced the space.
    pub provenance: (usize, usize),
}

impl RecycleSpace {
    pub fn k(&self) -> usize {
        self.c.len()
    }

    /// Unit-norm columns `Ũ = U·D`.
    pub fn u_tilde(&self) -> Vec<Vec<f64>> {
        self.u
            .iter()
            .zip(&self.d)
            .map(|(u, &s)| u.iter().map(|x| x * s).collect())
            .collect()
    }

    /// Applies the solution basis to coefficients, returning an update of `x`.
    pub fn solution_update(&self, a: &dyn LinearOperator, p: &Preconditioner, coeffs: &[f64]) -> Vec<f64> {
        let n = a.dim();
        let t = combine(&self.u, coeffs, n);
        if self.flexible {
            t
        } else {
            p.apply(a, &t)
        }
    }

    /// `‖A·M(U) − C‖_F / ‖C‖_F`; costs `k` operator applications.
    pub fn invariant_residual(&self, a: &dyn LinearOperator, p: &Preconditioner) -> f64 {
        let mut acc = 0.0;
        for (ui, ci) in self.u.iter().zip(&self.c) {
            let x = if self.flexible { ui.clone() } else { p.apply(a, ui) };
            let au = a.apply_vec(&x);
            acc += sub(&au, ci).iter().map(|v| v * v).sum::<f64>();
        }
        (acc / self.k().max(1) as f64).sqrt()
    }
}

/// Projects the residual onto `range(C)⊥` and corrects `x` accordingly.
///
/// Returns `(x1, r1)` with `r0 = b − A x0`. When `stale_tol` is set, the invariant
/// `A·M(U) = C` is verified first at the cost of `k` products.
pub fn warm_start(
    recycle: &RecycleSpace,
    a: &dyn LinearOperator,
    p: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    stale_tol: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    if let Some(tol) = stale_tol {
        let residual = recycle.invariant_residual(a, p);
        if residual > tol {
            return Err(SolverError::StaleRecycle { residual });
        }
    }
    let r0 = super::dr::residual(a, b, x0);
    Ok(warm_start_from(recycle, a, p, x0, r0))
}

pub(crate) fn warm_start_from(
    recycle: &RecycleSpace,
    a: &dyn LinearOperator,
    p: &Preconditioner,
    x0: &[f64],
    mut r: Vec<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let cr = project(&recycle.c, &r);
    let mut x = x0.to_vec();
    axpy(1.0, &recycle.solution_update(a, p, &cr), &mut x);
    for (ci, &t) in recycle.c.iter().zip(&cr) {
        axpy(-t, ci, &mut r);
    }
    (x, r)
}

/// Reduced coordinates of one recycled cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockwiseLsq {
    /// Coefficients on `Ũ`.
    pub z: Vec<f64>,
    /// Coefficients on `V_{m−k}`.
    pub y: Vec<f64>,
    pub rho: f64,
}

impl BlockwiseLsq {
    /// `[z; y]`
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = self.z.clone();
        out.extend_from_slice(&self.y);
        out
    }
}

/// Solves the least-squares problem with matrix `[[D, B], [0, H̄]]` and right-hand side
/// `[Cᵀr; βe₁]` block by block.
pub fn gcro_lsq_blockwise(
    hbar: &DenseMatrix,
    b: &DenseMatrix,
    d: &[f64],
    ctr: &[f64],
    beta: f64,
) -> Result<BlockwiseLsq, SolverError> {
    let (rows, j) = hbar.shape();
    if b.shape() != (d.len(), j) || ctr.len() != d.len() || (j > 0 && rows != j + 1) {
        return Err(SolverError::InvalidParameter("inconsistent blockwise least-squares shapes".into()));
    }
    let (y, rho) = if j == 0 {
        (Vec::new(), beta.abs())
    } else {
        let mut rhs = vec![0.0; j + 1];
        rhs[0] = beta;
        let mut lsq = IncrementalLsq::new(rhs);
        for c in 0..j {
            lsq.push_column(&hbar.column(c));
        }
        (lsq.solve()?, lsq.residual())
    };
    Ok(BlockwiseLsq { z: recycle_coefficients(b, d, ctr, &y), y, rho })
}

/// `D⁻¹(Cᵀr − B y)`
pub(crate) fn recycle_coefficients(b: &DenseMatrix, d: &[f64], ctr: &[f64], y: &[f64]) -> Vec<f64> {
    (0..d.len())
        .map(|i| {
            let by: f64 = y.iter().enumerate().map(|(c, yc)| b[(i, c)] * yc).sum();
            (ctr[i] - by) / d[i]
        })
        .collect()
}

/// Harmonic Ritz pairs of the generalized problem `H̄ᵀH̄g = θH̄ᵀGg`, with `G = ŴᵀV̂`,
/// through the equivalent square pencil `(H + δ²f e_mᵀ)g = θ[I δf]Gg`.
pub fn gcro_harmonic_ritz(
    hbar: &DenseMatrix,
    g: &DenseMatrix,
    k: usize,
) -> Result<EigenPairSet, SolverError> {
    let w = hbar.cols();
    if g.shape() != hbar.shape() {
        return Err(SolverError::InvalidParameter("ŴᵀV̂ must match H̄ in shape".into()));
    }
    let (h, f, delta) = square_part(hbar)?;
    let hh = corrected(&h, &f, delta);
    let rm = DenseMatrix::from_fn(w, w, |i, c| g[(i, c)] + delta * f[i] * g[(w, c)]);
    Ok(small_generalized_eig(&hh, &rm, w)?.truncate(k.min(w - 1), w - 1))
}

/// Full spectrum of `Ĥ = [[I, B], [0, H̃]]`, `H̃ = H_{m−k} + δ²f e_{m−k}ᵀ`, from the
/// eigenpairs of `H̃` alone.
///
/// The identity block contributes the eigenvalue 1 with eigenvectors `[e_i; 0]`; every
/// eigenpair `(λ, g)` of `H̃` lifts to `[−B g/(1 − λ); g]`.
pub fn strategy_b_spectrum(b: &DenseMatrix, hbar: &DenseMatrix) -> Result<EigenPairSet, SolverError> {
    let (k, j) = b.shape();
    if hbar.cols() != j || hbar.rows() != j + 1 {
        return Err(SolverError::InvalidParameter("B and H̄ widths differ".into()));
    }
    let m = k + j;
    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(m);
    for i in 0..k {
        let mut e = vec![Complex64::new(0.0, 0.0); m];
        e[i] = Complex64::new(1.0, 0.0);
        pairs.push((Complex64::new(1.0, 0.0), e));
    }
    if j > 0 {
        let (h, f, delta) = square_part(hbar)?;
        let set = full_eig(&corrected(&h, &f, delta), EigOptions::default().max_sweeps)?;
        for i in 0..set.len() {
            let lam = set.values[i];
            if (lam - 1.0).norm() < 1e-12 {
                return Err(SolverError::StrategyBDegenerate);
            }
            let g = set.vector(i);
            let s = Complex64::new(1.0, 0.0) / (1.0 - lam);
            let mut vec: Vec<Complex64> = (0..k)
                .map(|r| -(0..j).map(|c| g[c] * b[(r, c)]).sum::<Complex64>() * s)
                .collect();
            vec.extend(g);
            pairs.push((lam, vec));
        }
    }
    Ok(assemble(m, pairs))
}

/// New recycle pair from a finished cycle.
///
/// `hbar` is the `(w+1) x w` cycle matrix, `what` the `w+1` orthonormal image vectors,
/// `vhat` the `w` solution-space vectors and `pk` the selected eigenvectors. `aux`
/// is the `W_m` basis of strategy C, and `g` (the cycle's `ŴᵀV̂` or `ŴᵀW_m`) feeds the
/// cached head recursion.
#[allow(clippy::too_many_arguments)]
pub fn update_recycle_space(
    hbar: &DenseMatrix,
    what: &[Vec<f64>],
    vhat: &[Vec<f64>],
    pk: &DenseMatrix,
    flexible: bool,
    aux: Option<&[Vec<f64>]>,
    g: Option<&DenseMatrix>,
    provenance: (usize, usize),
) -> Result<RecycleSpace, SolverError> {
    let n = what.first().map_or(0, Vec::len);
    let mut pk = pk.clone();
    let (q, r) = loop {
        if pk.cols() == 0 {
            return Err(SmallAlgError::RankDeficient { column: 0 }.into());
        }
        match reduced_qr(&hbar.matmul(&pk)) {
            Ok(qr) => break qr,
            Err(SmallAlgError::RankDeficient { column }) => {
                log::warn!("H̄P lost rank at column {column}; shrinking recycle space to {}", pk.cols() - 1);
                pk = drop_column(&pk, column);
            }
            Err(e) => return Err(e.into()),
        }
    };
    let rinv = invert_upper(&r)?;
    let pr = pk.matmul(&rinv);
    let c = basis_times(what, &q, n);
    let u = basis_times(vhat, &pr, n);
    let d: Vec<f64> = if flexible { vec![1.0; u.len()] } else { u.iter().map(|x| 1.0 / norm(x)).collect() };
    let w = aux.map(|wm| basis_times(wm, &pr, n));
    let kk = u.len();
    let head = match g {
        Some(g) => {
            let mut h = q.tr_matmul(&g.matmul(&pr));
            for i in 0..kk {
                for (jj, dj) in d.iter().enumerate() {
                    h[(i, jj)] *= dj;
                }
            }
            h
        }
        None => DenseMatrix::zeros(kk, kk),
    };
    Ok(RecycleSpace { c, u, d, flexible, head, w, provenance })
}
