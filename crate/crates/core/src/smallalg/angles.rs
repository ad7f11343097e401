use std::f64::consts::FRAC_1_SQRT_2;

use super::{SmallAlgError, ORTHONORMAL_TOL};
use crate::dense::DenseMatrix;
use crate::vecops::{dot, gram, orthonormality_error};

/// Distance between two subspaces on the Grassmann manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceDistance {
    pub d_p: f64,
    pub p: usize,
    pub d_tilde: f64,
}

/// Singular values (descending) of the matrix whose columns are `cols`, by one-sided Jacobi.
pub fn singular_values(cols: &[Vec<f64>]) -> Vec<f64> {
    let mut a: Vec<Vec<f64>> = cols.to_vec();
    let k = a.len();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = a.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn check_orthonormal(c: &[Vec<f64>]) -> Result<(), SmallAlgError> {
    let deviation = orthonormality_error(c);
    if deviation > ORTHONORMAL_TOL {
        Err(SmallAlgError::NotOrthonormal { deviation })
    } else {
        Ok(())
    }
}

/// Principal angles between `range(C1)` and `range(C2)`, ascending.
///
/// Cosines come from the singular values of `C1ᵀC2`. Angles below π/4 are taken from
/// the sines, the singular values of the component of the narrower basis orthogonal to
/// the wider one, which keeps nearly coincident subspaces accurate to rounding.
pub fn principal_angles(c1: &[Vec<f64>], c2: &[Vec<f64>]) -> Result<Vec<f64>, SmallAlgError> {
    check_orthonormal(c1)?;
    check_orthonormal(c2)?;
    let (wide, narrow) = if c1.len() >= c2.len() { (c1, c2) } else { (c2, c1) };
    let p = narrow.len();
    if p == 0 {
        return Ok(vec![]);
    }
    if let (Some(a), Some(b)) = (wide.first(), narrow.first()) {
        if a.len() != b.len() {
            return Err(SmallAlgError::DimensionMismatch("bases live in different spaces".into()));
        }
    }
    let m: DenseMatrix = gram(wide, narrow);
    let cosines = singular_values(&m.columns());

    let residual: Vec<Vec<f64>> = narrow
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let mut r = v.clone();
            for (i, w) in wide.iter().enumerate() {
                let c = m[(i, j)];
                for (ri, wi) in r.iter_mut().zip(w) {
                    *ri -= c * wi;
                }
            }
            r
        })
        .collect();
    let mut sines = singular_values(&residual);
    sines.reverse();

    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            if c > FRAC_1_SQRT_2 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect())
}

pub fn grassmann_distance(c1: &[Vec<f64>], c2: &[Vec<f64>]) -> Result<SubspaceDistance, SmallAlgError> {
    let theta = principal_angles(c1, c2)?;
    let p = theta.len();
    let d_p = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    let d_tilde = if p == 0 { 0.0 } else { d_p / (p as f64).sqrt() };
    Ok(SubspaceDistance { d_p, p, d_tilde })
}
