//! Restarted, deflated and recycled GMRES-family solvers.

mod arnoldi;
mod deflation;
mod dr;
mod gcro;
mod gcro_solver;

pub use arnoldi::{arnoldi_projected, fgmres_cycle, ArnoldiState, ProjectedArnoldi};
pub use deflation::{
    harmonic_ritz_standard, harmonic_ritz_strategy_a, rollin_restart_vector, vtz_leading_block, DeflationSubspace,
};
pub use dr::{fgmresdr_solve, gmres_solve, gmresdr_solve, DrCycleView, DrParams, DrSolver};
pub use gcro::{
    gcro_harmonic_ritz, gcro_lsq_blockwise, strategy_b_spectrum, update_recycle_space, warm_start, BlockwiseLsq,
    RecycleSpace,
};
pub use gcro_solver::{fgcrodr_solve, gcrodr_solve, GcroCycleView, GcroDrSolver, GcroEvent, GcroParams, RecyclePolicy};

use thiserror::Error;

use crate::history::{Event, HistoryRow};
use crate::operators::{MatvecCounter, OperatorError};
use crate::smallalg::SmallAlgError;

/// Default relative discrepancy between true and least-squares residuals that forces a cold restart.
pub const DEFAULT_SAFEGUARD: f64 = 0.05;
/// Cycles between full recomputations of cached small products.
pub const DEFAULT_REFRESH_EVERY: usize = 10;
/// Relative size of `h_{j+1,j}` below which Arnoldi reports an invariant subspace.
pub const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    SmallAlg(#[from] SmallAlgError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("this solver needs a stationary preconditioner")]
    VariablePreconditioner,
    #[error("recycled pair no longer satisfies A·U = C (residual {residual:.3e})")]
    StaleRecycle { residual: f64 },
    #[error("square Hessenberg block is singular")]
    SingularHm,
    #[error("closed-form strategy B spectrum is degenerate (eigenvalue 1 in the Krylov block)")]
    StrategyBDegenerate,
}

/// Deflation strategy for the flexible solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Harmonic Ritz vectors of `A` with respect to `range(Z)`, using `VᵀZ`.
    A,
    /// Standard eigenproblem on `H_m + h² f e_mᵀ`.
    #[default]
    B,
    /// Auxiliary basis `W` propagated alongside `Z` (FGCRO-DR only).
    C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveControl {
    /// Relative residual target.
    pub tol: f64,
    /// Operator applications allowed for this solve.
    pub max_matvecs: usize,
    /// Denominator for relative residuals; `‖b‖` when absent.
    pub reference_norm: Option<f64>,
    /// Stop at the first cycle end whose true residual fell below this fraction of the previous one.
    pub ratio_trigger: Option<f64>,
}

impl SolveControl {
    pub fn new(tol: f64, max_matvecs: usize) -> Self {
        Self { tol, max_matvecs, reference_norm: None, ratio_trigger: None }
    }
}

impl Default for SolveControl {
    fn default() -> Self {
        Self::new(1e-8, 100_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    RatioTrigger,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    /// Operator applications spent by this solve.
    pub matvecs: usize,
    pub cycles: usize,
    pub final_lsq_residual: f64,
    pub final_true_residual: f64,
    pub cold_restarts: usize,
    /// Set when three consecutive cycles failed to reduce the true residual.
    pub stagnated: bool,
    pub history: Vec<HistoryRow>,
}

/// Labels attached to history rows emitted by a solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowContext {
    pub system_index: usize,
    pub coupling_cycle: usize,
}

/// Shared bookkeeping for residual histories, budgets and stagnation.
pub(crate) struct Recorder {
    ctx: RowContext,
    counter: MatvecCounter,
    start: usize,
    rows: Vec<HistoryRow>,
    iteration: usize,
    cycle: usize,
    stall: usize,
    last_cycle_res: f64,
    stagnated: bool,
    cold_restarts: usize,
}

impl Recorder {
    pub(crate) fn new(ctx: RowContext, counter: MatvecCounter) -> Self {
        let start = counter.get();
        Self {
            ctx,
            counter,
            start,
            rows: Vec::new(),
            iteration: 0,
            cycle: 0,
            stall: 0,
            last_cycle_res: f64::INFINITY,
            stagnated: false,
            cold_restarts: 0,
        }
    }

    pub(crate) fn used(&self) -> usize {
        self.counter.get() - self.start
    }

    pub(crate) fn row(&mut self, lsq: f64) {
        self.rows.push(HistoryRow {
            system_index: self.ctx.system_index,
            coupling_cycle: self.ctx.coupling_cycle,
            solver_cycle: self.cycle,
            iteration: self.iteration,
            matvecs: self.counter.get(),
            lsq_residual_rel: lsq,
            true_residual_rel: None,
            event: Event::None,
            d_p: None,
            p: None,
        });
    }

    pub(crate) fn initial(&mut self, rel: f64) {
        self.row(rel);
        if let Some(r) = self.rows.last_mut() {
            r.true_residual_rel = Some(rel);
        }
    }

    pub(crate) fn iteration(&mut self, lsq: f64) {
        self.iteration += 1;
        self.row(lsq);
    }

    pub(crate) fn mark(&mut self, event: Event) {
        if let Some(r) = self.rows.last_mut() {
            if r.event == Event::None || event == Event::ColdRestart {
                r.event = event;
            }
        }
    }

    /// Annotates the last row with the cycle-end true residual and tracks stagnation.
    pub(crate) fn cycle_end(&mut self, true_rel: f64) {
        if let Some(r) = self.rows.last_mut() {
            r.true_residual_rel = Some(true_rel);
            r.matvecs = self.counter.get();
        }
        if true_rel >= self.last_cycle_res {
            self.stall += 1;
            if self.stall >= 3 && !self.stagnated {
                self.stagnated = true;
                log::warn!("no residual decrease over 3 consecutive cycles (relative residual {true_rel:e})");
            }
        } else {
            self.stall = 0;
        }
        self.last_cycle_res = true_rel;
        self.cycle += 1;
    }

    pub(crate) fn distance(&mut self, d_p: f64, p: usize) {
        if let Some(r) = self.rows.last_mut() {
            r.d_p = Some(d_p);
            r.p = Some(p);
        }
    }

    pub(crate) fn cold_restart(&mut self) {
        self.cold_restarts += 1;
        self.mark(Event::ColdRestart);
    }

    pub(crate) fn cycles(&self) -> usize {
        self.cycle
    }

    pub(crate) fn finish(self, stop: StopReason, lsq: f64, true_rel: f64) -> SolveReport {
        SolveReport {
            converged: stop == StopReason::Converged,
            stop,
            iterations: self.iteration,
            matvecs: self.counter.get() - self.start,
            cycles: self.cycle,
            final_lsq_residual: lsq,
            final_true_residual: true_rel,
            cold_restarts: self.cold_restarts,
            stagnated: self.stagnated,
            history: self.rows,
        }
    }
}

/// Whether the safeguard should discard deflation data.
pub(crate) fn discrepancy_exceeded(true_res: f64, lsq_res: f64, eps: f64) -> bool {
    true_res > 0.0 && ((true_res - lsq_res).abs() / true_res) > eps
}
