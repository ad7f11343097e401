//! Deflated-restart and subspace-recycling Krylov solvers with a partitioned
//! block Gauss-Seidel driver for two-field coupled systems.

pub mod coupled;
pub mod dense;
pub mod history;
pub mod krylov;
pub mod operators;
pub mod smallalg;
pub mod vecops;

pub use coupled::{CoupledError, CoupledProblem, FluidSolver, LbgsOutcome, PartitionConfig};
pub use dense::DenseMatrix;
pub use history::{ConvergenceRecord, Event, HistoryError, HistoryRow};
pub use krylov::{RowContext, SolveControl, SolveReport, SolverError, StopReason, Strategy};
pub use operators::{CountedOperator, CsrMatrix, LinearOperator, MatvecCounter, OperatorError, Preconditioner};
pub use smallalg::{EigenPairSet, SmallAlgError, SubspaceDistance};
