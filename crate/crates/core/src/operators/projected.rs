use super::{LinearOperator, OperatorError};
use crate::smallalg::ORTHONORMAL_TOL;
use crate::vecops::{axpy, dot, orthonormality_error};

/// `v ↦ (I − CCᵀ) A v` for an orthonormal `C`.
pub struct ProjectedOperator<'a> {
    inner: &'a dyn LinearOperator,
    c: &'a [Vec<f64>],
}

impl<'a> ProjectedOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator, c: &'a [Vec<f64>]) -> Result<Self, OperatorError> {
        if let Some(bad) = c.iter().find(|v| v.len() != inner.dim()) {
            return Err(OperatorError::DimensionMismatch { expected: inner.dim(), got: bad.len() });
        }
        let deviation = orthonormality_error(c);
        if deviation > ORTHONORMAL_TOL {
            return Err(OperatorError::NotOrthonormal { deviation });
        }
        Ok(Self { inner, c })
    }

    /// Removes the `range(C)` component of `y` in place.
    pub fn project(&self, y: &mut [f64]) {
        for ci in self.c {
            let t = dot(ci, y);
            axpy(-t, ci, y);
        }
    }
}

impl LinearOperator for ProjectedOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        self.project(y);
    }
}
