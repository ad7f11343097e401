use std::collections::BTreeSet;

use super::{CsrMatrix, OperatorError};

/// Level-of-fill incomplete LU factors. `L` is unit lower triangular and stored
/// without its diagonal; `U` is upper triangular including the diagonal.
#[derive(Debug, Clone)]
pub struct IluFactorization {
    level: usize,
    l: CsrMatrix,
    u: CsrMatrix,
}

/// ILU(k) on the symbolic level-`level` pattern of `a`.
///
/// Pivots below `1e-14·‖A‖_∞` are reported as `ZeroPivot`; the diagonal is always
/// part of the pattern even when `a` stores no entry there.
pub fn ilu_factor(a: &CsrMatrix, level: usize) -> Result<IluFactorization, OperatorError> {
    let n = a.n();
    let floor = 1e-14 * a.inf_norm();
    let mut w = vec![0.0; n];
    let mut lev = vec![usize::MAX; n];

    let mut l_ptr = vec![0usize];
    let mut l_idx = Vec::new();
    let mut l_val = Vec::new();
    let mut u_ptr = vec![0usize];
    let mut u_idx: Vec<usize> = Vec::new();
    let mut u_val: Vec<f64> = Vec::new();
    let mut u_lev: Vec<usize> = Vec::new();
    let mut u_diag = vec![0.0; n];

    for i in 0..n {
        let mut pattern: BTreeSet<usize> = BTreeSet::new();
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            w[j] = v;
            lev[j] = 0;
            pattern.insert(j);
        }
        if pattern.insert(i) {
            w[i] = 0.0;
            lev[i] = 0;
        }

        let mut cursor = pattern.range(..i).next().copied();
        while let Some(k) = cursor {
            let factor = w[k] / u_diag[k];
            w[k] = factor;
            let lk = lev[k];
            for p in u_ptr[k]..u_ptr[k + 1] {
                let j = u_idx[p];
                if j == k {
                    continue;
                }
                let fill = lk.saturating_add(u_lev[p]).saturating_add(1);
                if lev[j] == usize::MAX {
                    if fill > level {
                        continue;
                    }
                    pattern.insert(j);
                    w[j] = 0.0;
                    lev[j] = fill;
                } else if fill < lev[j] {
                    lev[j] = fill;
                }
                w[j] -= factor * u_val[p];
            }
            cursor = pattern.range(k + 1..i).next().copied();
        }

        if !(w[i].abs() > floor) || !w[i].is_finite() {
            for &j in &pattern {
                lev[j] = usize::MAX;
            }
            return Err(OperatorError::ZeroPivot { row: i });
        }
        for &j in &pattern {
            if j < i {
                l_idx.push(j);
                l_val.push(w[j]);
            } else {
                u_idx.push(j);
                u_val.push(w[j]);
                u_lev.push(lev[j]);
                if j == i {
                    u_diag[i] = w[j];
                }
            }
            lev[j] = usize::MAX;
            w[j] = 0.0;
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
    }

    Ok(IluFactorization {
        level,
        l: CsrMatrix::new(n, l_ptr, l_idx, l_val)?,
        u: CsrMatrix::new(n, u_ptr, u_idx, u_val)?,
    })
}

impl IluFactorization {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn n(&self) -> usize {
        self.u.n()
    }

    /// Strictly lower part of `L`; its unit diagonal is implicit.
    pub fn strict_lower(&self) -> &CsrMatrix {
        &self.l
    }

    pub fn upper(&self) -> &CsrMatrix {
        &self.u
    }

    /// `L` with the unit diagonal made explicit.
    pub fn lower(&self) -> CsrMatrix {
        self.l.shifted(1.0)
    }

    /// Stored entries of `L` (off-diagonal) and `U`.
    pub fn stored_entries(&self) -> usize {
        self.l.nnz() + self.u.nnz()
    }

    /// `U⁻¹ L⁻¹ v`
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(v.len(), n, "ILU solve input length");
        let mut x = v.to_vec();
        for i in 0..n {
            let (cols, vals) = self.l.row(i);
            let mut s = x[i];
            for (&j, &lv) in cols.iter().zip(vals) {
                s -= lv * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.u.row(i);
            let mut s = x[i];
            let mut d = 1.0;
            for (&j, &uv) in cols.iter().zip(vals) {
                if j == i {
                    d = uv;
                } else {
                    s -= uv * x[j];
                }
            }
            x[i] = s / d;
        }
        x
    }
}
