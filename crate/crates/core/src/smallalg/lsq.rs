use super::{SmallAlgError, RANK_TOL};
use crate::dense::DenseMatrix;

/// Column-by-column Givens least squares for `min ‖c − H̄y‖`.
///
/// Columns may carry a dense leading block (as after a deflated restart); every
/// entry below the diagonal is annihilated bottom-up with adjacent-row rotations,
/// so Hessenberg columns cost a single rotation.
#[derive(Debug, Clone)]
pub struct IncrementalLsq {
    rows: usize,
    g: Vec<f64>,
    r: Vec<Vec<f64>>,
    rots: Vec<(usize, f64, f64)>,
    fro2: f64,
}

impl IncrementalLsq {
    /// `rhs` fixes the total row count (typically `m + 1`).
    pub fn new(rhs: Vec<f64>) -> Self {
        Self { rows: rhs.len(), g: rhs, r: Vec::new(), rots: Vec::new(), fro2: 0.0 }
    }

    pub fn ncols(&self) -> usize {
        self.r.len()
    }

    /// Appends a column (shorter columns are zero-padded) and returns the new residual norm.
    pub fn push_column(&mut self, col: &[f64]) -> f64 {
        let j = self.r.len();
        assert!(j + 1 < self.rows + 1 && col.len() <= self.rows, "column does not fit");
        let mut v = vec![0.0; self.rows];
        v[..col.len()].copy_from_slice(col);
        self.fro2 += col.iter().map(|x| x * x).sum::<f64>();
        for &(i, c, s) in &self.rots {
            rotate(&mut v, i, c, s);
        }
        if let Some(last) = (j + 1..self.rows).rev().find(|&i| v[i] != 0.0) {
            for i in (j..last).rev() {
                let (c, s) = givens(v[i], v[i + 1]);
                rotate(&mut v, i, c, s);
                v[i + 1] = 0.0;
                rotate(&mut self.g, i, c, s);
                self.rots.push((i, c, s));
            }
        }
        self.r.push(v);
        self.residual()
    }

    pub fn residual(&self) -> f64 {
        self.g[self.r.len()..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn solve(&self) -> Result<Vec<f64>, SmallAlgError> {
        let k = self.r.len();
        let floor = RANK_TOL * self.fro2.sqrt();
        let mut y = self.g[..k].to_vec();
        for i in (0..k).rev() {
            let d = self.r[i][i];
            if d.abs() < floor || d == 0.0 {
                return Err(SmallAlgError::SingularTriangle { index: i });
            }
            let mut s = y[i];
            for j in i + 1..k {
                s -= self.r[j][i] * y[j];
            }
            y[i] = s / d;
        }
        Ok(y)
    }
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0);
    }
    let r = a.hypot(b);
    (a / r, b / r)
}

#[inline]
fn rotate(v: &mut [f64], i: usize, c: f64, s: f64) {
    let (a, b) = (v[i], v[i + 1]);
    v[i] = c * a + s * b;
    v[i + 1] = -s * a + c * b;
}

/// Solves `min ‖c − H̄y‖₂` for `H̄` of shape `(j+1) x j`; returns `(y, ‖c − H̄y‖)`.
pub fn hessenberg_lsq(hbar: &DenseMatrix, c: &[f64]) -> Result<(Vec<f64>, f64), SmallAlgError> {
    let (rows, cols) = hbar.shape();
    if c.len() != rows || rows < cols {
        return Err(SmallAlgError::DimensionMismatch(format!(
            "H̄ is {rows}x{cols}, rhs has length {}",
            c.len()
        )));
    }
    let mut lsq = IncrementalLsq::new(c.to_vec());
    for j in 0..cols {
        lsq.push_column(&hbar.column(j));
    }
    let y = lsq.solve()?;
    Ok((y, lsq.residual()))
}
