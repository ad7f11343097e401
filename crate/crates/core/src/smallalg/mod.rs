//! Dense kernels for the small projected problems solved once per cycle.

mod angles;
mod eig;
mod lsq;
mod lu;
mod qr;

pub use angles::{grassmann_distance, principal_angles, singular_values, SubspaceDistance};
pub use eig::{
    small_generalized_eig, small_standard_eig, small_standard_eig_with, EigOptions, EigenPairSet,
};
pub use lsq::{hessenberg_lsq, IncrementalLsq};
pub use lu::LuFactorization;
pub use qr::reduced_qr;

pub(crate) use eig::{assemble, full_eig};
pub(crate) use qr::invert_upper;

use thiserror::Error;

/// Relative pivot floor shared by QR and the Givens least-squares solver.
pub const RANK_TOL: f64 = 1e-14;
/// Largest square problem accepted by the eigensolvers.
pub const DEFAULT_EIG_CAP: usize = 512;
/// Orthonormality tolerance for principal-angle inputs.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmallAlgError {
    #[error("rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("singular triangular factor at diagonal {index}")]
    SingularTriangle { index: usize },
    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("both pencil matrices are singular")]
    SingularPencil,
    #[error("matrix is singular (zero pivot at {pivot})")]
    Singular { pivot: usize },
    #[error("basis is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("problem size {size} exceeds eigensolver cap {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
