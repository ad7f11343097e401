//! Sparse operators, preconditioners, problem generation and Matrix Market I/O.

mod csr;
mod generate;
mod ilu;
mod mmio;
mod precond;
mod projected;

pub use csr::CsrMatrix;
pub use generate::gen_convection_diffusion;
pub use ilu::{ilu_factor, IluFactorization};
pub use mmio::{parse_matrix_market, parse_rhs, read_matrix_market, read_rhs, write_matrix_market, write_rhs};
pub use precond::{PrecondSpec, Preconditioner};
pub use projected::ProjectedOperator;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero pivot in row {row}")]
    ZeroPivot { row: usize },
    #[error("basis is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("unsupported Matrix Market field or symmetry: {0}")]
    UnsupportedField(String),
    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A square linear map applied into a caller-provided buffer.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

/// Shared, monotone count of operator applications.
#[derive(Debug, Clone, Default)]
pub struct MatvecCounter(Arc<AtomicUsize>);

impl MatvecCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

/// Wraps an operator so that every application is counted.
pub struct CountedOperator<'a> {
    inner: &'a dyn LinearOperator,
    counter: MatvecCounter,
}

impl<'a> CountedOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        Self { inner, counter: MatvecCounter::new() }
    }

    pub fn with_counter(inner: &'a dyn LinearOperator, counter: MatvecCounter) -> Self {
        Self { inner, counter }
    }

    pub fn counter(&self) -> &MatvecCounter {
        &self.counter
    }

    pub fn matvecs(&self) -> usize {
        self.counter.get()
    }
}

impl LinearOperator for CountedOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.counter.bump();
        self.inner.apply(x, y);
    }
}

/// Counted sparse product, checking the input length.
pub fn spmv(a: &CountedOperator<'_>, x: &[f64]) -> Result<Vec<f64>, OperatorError> {
    if x.len() != a.dim() {
        return Err(OperatorError::DimensionMismatch { expected: a.dim(), got: x.len() });
    }
    Ok(a.apply_vec(x))
}
