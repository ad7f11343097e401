//! Scenario execution and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use krylov_recycle::coupled::{gen_coupled_problem, lbgs_solve, CoupledError, FluidSolver, LbgsOutcome};
use krylov_recycle::krylov::{DrParams, DrSolver, GcroDrSolver};
use krylov_recycle::operators::{gen_convection_diffusion, read_matrix_market, read_rhs};
use krylov_recycle::{ConvergenceRecord, CountedOperator, CsrMatrix, RowContext, SolveControl, SolveReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Mode, ProblemSpec, RecycleFrom, Scenario};
use crate::CliError;

/// How a run ended, mapped onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// Matvec budget or coupling limit reached.
    Exhausted,
    Diverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged => 0,
            Self::Exhausted => 2,
            Self::Diverged => 1,
        }
    }

    fn worst(self, other: Self) -> Self {
        let rank = |s: Self| match s {
            Self::Converged => 0,
            Self::Exhausted => 1,
            Self::Diverged => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

/// Result of one point of a scenario.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: RecycleFrom,
    pub record: ConvergenceRecord,
    pub status: Status,
    pub total_matvecs: usize,
    pub couplings: usize,
    pub final_ra: f64,
    pub final_rs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub runs: Vec<RunResult>,
    pub status: Status,
    pub summary: String,
}

/// Seeded right-hand side with entries uniform in `[-1, 1)`.
pub fn seeded_rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Solves `A x = b` from `x = 0` with the configured solver family.
pub fn solve_single(
    a: &CsrMatrix,
    b: &[f64],
    scenario: &Scenario,
) -> Result<(Vec<f64>, SolveReport), CliError> {
    let counted = CountedOperator::new(a);
    let p = scenario.precond.build(a)?;
    let control = SolveControl::new(scenario.tol, scenario.max_matvecs);
    let x0 = vec![0.0; a.n()];
    let ctx = RowContext::default();
    let out = match scenario.solver {
        FluidSolver::Gmres { m } => DrSolver::new(DrParams::new(m, 0)).solve(&counted, &p, b, &x0, &control, ctx)?,
        FluidSolver::GmresDr(prm) | FluidSolver::FgmresDr(prm) => {
            DrSolver::new(prm).solve(&counted, &p, b, &x0, &control, ctx)?
        }
        FluidSolver::GcroDr(prm) | FluidSolver::FgcroDr(prm) => {
            GcroDrSolver::new(prm).solve(&counted, &p, b, &x0, &control, ctx, false)?
        }
    };
    Ok(out)
}

fn run_single(scenario: &Scenario) -> Result<RunResult, CliError> {
    let (a, b) = match &scenario.problem {
        ProblemSpec::ConvectionDiffusion { grid, peclet } => {
            let a = gen_convection_diffusion(*grid, *grid, *peclet);
            let b = seeded_rhs(a.n(), scenario.seed);
            (a, b)
        }
        ProblemSpec::MatrixMarket { matrix, rhs } => {
            let a = read_matrix_market(matrix)?;
            let b = match rhs {
                Some(r) => read_rhs(r)?,
                None => seeded_rhs(a.n(), scenario.seed),
            };
            if b.len() != a.n() {
                return Err(CliError::Config {
                    field: "problem.rhs".into(),
                    reason: format!("length {} does not match matrix order {}", b.len(), a.n()),
                });
            }
            (a, b)
        }
        ProblemSpec::Coupled { .. } => unreachable!("validated as single mode"),
    };
    let (_, report) = solve_single(&a, &b, scenario)?;
    let status = if report.converged { Status::Converged } else { Status::Exhausted };
    Ok(RunResult {
        label: RecycleFrom(None),
        total_matvecs: report.matvecs,
        couplings: 0,
        final_ra: report.final_true_residual,
        final_rs: None,
        record: ConvergenceRecord { rows: report.history },
        status,
    })
}

fn coupled_result(label: RecycleFrom, o: &LbgsOutcome, status: Status) -> RunResult {
    let last = o.history.last();
    RunResult {
        label,
        record: o.record.clone(),
        status,
        total_matvecs: o.total_matvecs,
        couplings: o.history.len().saturating_sub(1),
        final_ra: last.map_or(f64::NAN, |h| h.r_a),
        final_rs: last.map(|h| h.r_s),
    }
}

fn run_coupled(scenario: &Scenario, threads: Option<usize>) -> Result<Vec<RunResult>, CliError> {
    let ProblemSpec::Coupled { grid, peclet, n_s, coupling_strength } = scenario.problem else {
        unreachable!("validated as coupled mode")
    };
    let problem = gen_coupled_problem(grid, n_s, peclet, coupling_strength, scenario.seed)?;
    let base = scenario.partition.clone().expect("coupled scenarios carry a partition");
    let one = |label: &RecycleFrom| -> Result<RunResult, CliError> {
        let cfg = krylov_recycle::PartitionConfig { recycle_from: label.0, ..base.clone() };
        match lbgs_solve(&problem, &cfg) {
            Ok(o) => Ok(coupled_result(*label, &o, Status::Converged)),
            Err(CoupledError::MaxCouplings(o)) | Err(CoupledError::BudgetExhausted(o)) => {
                Ok(coupled_result(*label, &o, Status::Exhausted))
            }
            Err(CoupledError::DivergenceDetected { outcome, .. }) => {
                Ok(coupled_result(*label, &outcome, Status::Diverged))
            }
            Err(e) => Err(e.into()),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| scenario.sweep.par_iter().map(one).collect())
}

fn summary(scenario: &Scenario, runs: &[RunResult], status: Status) -> String {
    let first = &runs[0];
    let mut s = String::new();
    let mode = match scenario.mode {
        Mode::Single => "single",
        Mode::Coupled => "coupled",
    };
    let _ = writeln!(s, "mode={mode}");
    let _ = writeln!(s, "solver={}", scenario.solver.name());
    let _ = writeln!(s, "preconditioner={:?}", scenario.precond);
    let _ = writeln!(s, "seed={}", scenario.seed);
    let _ = writeln!(s, "total_matvecs={}", first.total_matvecs);
    let _ = writeln!(s, "couplings={}", first.couplings);
    let _ = writeln!(s, "converged={}", first.status == Status::Converged);
    let _ = writeln!(s, "final_rA={:e}", first.final_ra);
    let _ = writeln!(s, "final_rS={}", first.final_rs.map_or_else(|| "none".to_string(), |v| format!("{v:e}")));
    if scenario.mode == Mode::Coupled {
        let _ = writeln!(s, "recycle_from={}", first.label);
        let _ = writeln!(s, "status={status:?}");
    }
    if runs.len() > 1 {
        let base = first.total_matvecs as f64;
        for r in runs {
            let saving = 100.0 * (base - r.total_matvecs as f64) / base;
            let _ = writeln!(s, "run.{}.total_matvecs={}", r.label, r.total_matvecs);
            let _ = writeln!(s, "run.{}.couplings={}", r.label, r.couplings);
            let _ = writeln!(s, "run.{}.converged={}", r.label, r.status == Status::Converged);
            let _ = writeln!(s, "run.{}.saving_percent={saving:.2}", r.label);
        }
    }
    s
}

fn write_history(dir: &Path, record: &ConvergenceRecord) -> Result<(), CliError> {
    let path = dir.join("history.csv");
    let mut buf = Vec::new();
    record.write_csv(&mut buf).map_err(|e| CliError::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| CliError::io(&path, e))
}

/// Runs a validated scenario and writes `history.csv` and `summary.txt` under its output
/// directory. Sweeps also write one `runs/recycle_<label>/history.csv` per point, with the
/// top-level history belonging to the first point.
///
/// Nothing is written unless every run completes.
pub fn run_scenario(scenario: &Scenario, threads: Option<usize>) -> Result<ScenarioOutcome, CliError> {
    let runs = match scenario.mode {
        Mode::Single => vec![run_single(scenario)?],
        Mode::Coupled => run_coupled(scenario, threads)?,
    };
    let status = runs.iter().fold(Status::Converged, |acc, r| acc.worst(r.status));
    let text = summary(scenario, &runs, status);

    let out = &scenario.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_history(out, &runs[0].record)?;
    if runs.len() > 1 {
        for r in &runs {
            let dir = out.join("runs").join(format!("recycle_{}", r.label));
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            write_history(&dir, &r.record)?;
        }
    }
    let path = out.join("summary.txt");
    fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    Ok(ScenarioOutcome { runs, status, summary: text })
}

/// Parses the worker cap from `KRYLOV_RECYCLE_THREADS`.
pub fn threads_from_env(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config {
                field: "KRYLOV_RECYCLE_THREADS".into(),
                reason: format!("expected a positive integer, got `{v}`"),
            }),
        },
    }
}
