use super::{SmallAlgError, RANK_TOL};
use crate::dense::DenseMatrix;

/// Thin Householder QR of an `n x k` matrix with `n >= k`.
///
/// The diagonal of `R` is made nonnegative. A column whose diagonal falls below
/// `RANK_TOL * ‖M‖_F` is reported as `RankDeficient`.
pub fn reduced_qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix), SmallAlgError> {
    let (n, k) = m.shape();
    if n < k {
        return Err(SmallAlgError::DimensionMismatch(format!("reduced_qr needs n >= k, got {n}x{k}")));
    }
    let fro = m.frobenius_norm();
    // a[j] is column j, overwritten by the Householder vectors below the diagonal
    let mut a: Vec<Vec<f64>> = m.columns();
    let mut rdiag = vec![0.0; k];
    let mut betas = vec![0.0; k];

    for j in 0..k {
        let alpha = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if alpha == 0.0 {
            return Err(SmallAlgError::RankDeficient { column: j });
        }
        let diag = if a[j][j] > 0.0 { -alpha } else { alpha };
        a[j][j] -= diag;
        let vnorm2: f64 = a[j][j..].iter().map(|v| v * v).sum();
        let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
        betas[j] = beta;
        rdiag[j] = diag;
        let (head, tail) = a.split_at_mut(j + 1);
        let v = &head[j][j..];
        for col in tail.iter_mut() {
            let s: f64 = v.iter().zip(&col[j..]).map(|(x, y)| x * y).sum::<f64>() * beta;
            for (c, x) in col[j..].iter_mut().zip(v) {
                *c -= s * x;
            }
        }
    }

    let mut r = DenseMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..j {
            r[(i, j)] = a[j][i];
        }
        r[(j, j)] = rdiag[j];
    }

    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of I
    let mut q = DenseMatrix::zeros(n, k);
    for c in 0..k {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        for j in (0..k).rev() {
            let v = &a[j][j..];
            let s: f64 = v.iter().zip(&e[j..]).map(|(x, y)| x * y).sum::<f64>() * betas[j];
            for (ei, x) in e[j..].iter_mut().zip(v) {
                *ei -= s * x;
            }
        }
        q.set_column(c, &e);
    }

    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for c in j..k {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
        if r[(j, j)] < RANK_TOL * fro {
            return Err(SmallAlgError::RankDeficient { column: j });
        }
    }
    Ok((q, r))
}

/// Solves `R x = b` for upper-triangular `R`.
pub(crate) fn solve_upper(r: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, SmallAlgError> {
    let k = r.rows();
    let mut x = b.to_vec();
    for i in (0..k).rev() {
        let mut s = x[i];
        for j in i + 1..k {
            s -= r[(i, j)] * x[j];
        }
        if r[(i, i)] == 0.0 {
            return Err(SmallAlgError::SingularTriangle { index: i });
        }
        x[i] = s / r[(i, i)];
    }
    Ok(x)
}

/// `R⁻¹` for upper-triangular `R`.
pub(crate) fn invert_upper(r: &DenseMatrix) -> Result<DenseMatrix, SmallAlgError> {
    let k = r.rows();
    let mut inv = DenseMatrix::zeros(k, k);
    for c in 0..k {
        let mut e = vec![0.0; k];
        e[c] = 1.0;
        let x = solve_upper(r, &e)?;
        inv.set_column(c, &x);
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_columns_are_their_own_factor() {
        let m = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]);
        let (q, r) = reduced_qr(&m).unwrap();
        assert!(q.sub(&m).max_abs() < 1e-15);
        assert!(r.sub(&DenseMatrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn three_four_five() {
        let m = DenseMatrix::from_rows(&[&[3.0], &[4.0]]);
        let (q, r) = reduced_qr(&m).unwrap();
        assert!((q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let m = DenseMatrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]);
        assert_eq!(reduced_qr(&m).unwrap_err(), SmallAlgError::RankDeficient { column: 1 });
    }

    #[test]
    fn triangular_inverse() {
        let r = DenseMatrix::from_rows(&[&[2.0, 1.0], &[0.0, 4.0]]);
        let inv = invert_upper(&r).unwrap();
        assert!(r.matmul(&inv).sub(&DenseMatrix::identity(2)).max_abs() < 1e-15);
    }
}
