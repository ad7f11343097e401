//! Two-field coupled block system and its partitioned block Gauss-Seidel driver.
//!
//! The monolithic system is
//!
//! ```text
//! [ Aff  −Gfs ] [λ_a]   [bf]
//! [ Gsf   Ks  ] [λ_s] = [bs]
//! ```
//!
//! with a large sparse fluid block `Aff` and a small dense structural block `Ks`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::history::{ConvergenceRecord, Event};
use crate::krylov::{DrParams, DrSolver, GcroDrSolver, GcroParams, RowContext, SolveControl, SolverError, StopReason};
use crate::operators::{gen_convection_diffusion, CountedOperator, CsrMatrix, LinearOperator, OperatorError, PrecondSpec};
use crate::smallalg::{grassmann_distance, LuFactorization};
use crate::vecops::{axpy, dot, norm, sub};

/// Largest `n + n_s` for which the dense monolithic system is assembled.
pub const MONOLITHIC_LIMIT: usize = 4000;

#[derive(Debug, Error)]
pub enum CoupledError {
    #[error("monolithic block matrix is singular")]
    SingularMonolithic,
    #[error("structural block is singular")]
    SingularKs,
    #[error("no convergence within {} coupling cycles", .0.history.len())]
    MaxCouplings(Box<LbgsOutcome>),
    #[error("fluid residual grew steadily and more than tenfold over three couplings (cycle {cycle})")]
    DivergenceDetected { cycle: usize, outcome: Box<LbgsOutcome> },
    #[error("matvec budget exhausted after {} coupling cycles", .0.history.len())]
    BudgetExhausted(Box<LbgsOutcome>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

impl CoupledError {
    /// Partial result carried by the non-convergence variants.
    pub fn outcome(&self) -> Option<&LbgsOutcome> {
        match self {
            Self::MaxCouplings(o) | Self::BudgetExhausted(o) | Self::DivergenceDetected { outcome: o, .. } => Some(o),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub aff: CsrMatrix,
    /// `n x n_s`
    pub gfs: DenseMatrix,
    /// `n_s x n`
    pub gsf: DenseMatrix,
    pub ks: DenseMatrix,
    pub bf: Vec<f64>,
    pub bs: Vec<f64>,
    pub coupling_strength: f64,
}

impl CoupledProblem {
    pub fn n(&self) -> usize {
        self.aff.n()
    }

    pub fn n_s(&self) -> usize {
        self.ks.rows()
    }

    /// Dense monolithic matrix.
    pub fn assemble(&self) -> DenseMatrix {
        let (n, ns) = (self.n(), self.n_s());
        let mut m = DenseMatrix::zeros(n + ns, n + ns);
        for i in 0..n {
            let (cols, vals) = self.aff.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
            for j in 0..ns {
                m[(i, n + j)] = -self.gfs[(i, j)];
            }
        }
        for i in 0..ns {
            for j in 0..n {
                m[(n + i, j)] = self.gsf[(i, j)];
            }
            for j in 0..ns {
                m[(n + i, n + j)] = self.ks[(i, j)];
            }
        }
        m
    }

    /// `‖[bf; bs] − M [λ_a; λ_s]‖ / ‖[bf; bs]‖`
    pub fn monolithic_residual(&self, la: &[f64], ls: &[f64]) -> f64 {
        let mut rf = sub(&self.bf, &self.aff.apply_vec(la));
        axpy(1.0, &self.gfs.matvec(ls), &mut rf);
        let mut rs = sub(&self.bs, &self.ks.matvec(ls));
        axpy(-1.0, &self.gsf.matvec(la), &mut rs);
        let num = dot(&rf, &rf) + dot(&rs, &rs);
        let den = dot(&self.bf, &self.bf) + dot(&self.bs, &self.bs);
        (num / den).sqrt()
    }
}

/// Seeded synthetic coupled problem.
///
/// `Aff` is the convection-diffusion matrix on an `n_grid x n_grid` grid, `Ks` a random
/// SPD matrix shifted by the identity, and `Gfs`, `Gsf` random matrices with unit-norm
/// columns scaled by `coupling_strength`.
pub fn gen_coupled_problem(
    n_grid: usize,
    n_s: usize,
    peclet: f64,
    coupling_strength: f64,
    seed: u64,
) -> Result<CoupledProblem, CoupledError> {
    if n_s == 0 || n_s > 64 {
        return Err(CoupledError::InvalidConfig(format!("n_s must be in 1..=64, got {n_s}")));
    }
    if n_grid < 3 {
        return Err(CoupledError::InvalidConfig(format!("n_grid must be at least 3, got {n_grid}")));
    }
    let aff = gen_convection_diffusion(n_grid, n_grid, peclet);
    let n = aff.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |rows: usize, cols: usize| DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let r = uniform(n_s, n_s);
    let mut ks = r.matmul(&r.transpose());
    ks.scale(1.0 / n_s as f64);
    for i in 0..n_s {
        ks[(i, i)] += 1.0;
    }
    let unit_columns = |mut m: DenseMatrix| {
        for j in 0..m.cols() {
            let c = m.column(j);
            let s = coupling_strength / norm(&c);
            m.set_column(j, &c.iter().map(|x| x * s).collect::<Vec<_>>());
        }
        m
    };
    let gfs = unit_columns(uniform(n, n_s));
    let gsf = unit_columns(uniform(n_s, n));
    let bf = uniform(n, 1).column(0);
    let bs = uniform(n_s, 1).column(0);
    let problem = CoupledProblem { aff, gfs, gsf, ks, bf, bs, coupling_strength };
    if n + n_s <= MONOLITHIC_LIMIT {
        LuFactorization::new(&problem.assemble()).map_err(|_| CoupledError::SingularMonolithic)?;
    }
    Ok(problem)
}

/// Grid size, structural size, Péclet number, coupling strength and seed of the reference problem.
pub const REFERENCE_PROBLEM: (usize, usize, f64, f64, u64) = (24, 8, 30.0, 16.0, 7);

/// The seeded 576 + 8 reference problem, whose block Gauss-Seidel map has spectral radius
/// about 0.3.
pub fn reference_problem() -> Result<CoupledProblem, CoupledError> {
    let (g, ns, pe, s, seed) = REFERENCE_PROBLEM;
    gen_coupled_problem(g, ns, pe, s, seed)
}

/// Unpreconditioned GCRO-DR(45, 15) with the default partition settings.
pub fn reference_config(recycle_from: Option<usize>) -> PartitionConfig {
    PartitionConfig { recycle_from, solver: FluidSolver::GcroDr(GcroParams::new(45, 15)), ..Default::default() }
}

/// Dense direct solution of the monolithic system, with one refinement step.
pub fn monolithic_oracle(problem: &CoupledProblem) -> Result<(Vec<f64>, Vec<f64>), CoupledError> {
    let (n, ns) = (problem.n(), problem.n_s());
    if n + ns > MONOLITHIC_LIMIT {
        return Err(CoupledError::InvalidConfig(format!("monolithic size {} exceeds {MONOLITHIC_LIMIT}", n + ns)));
    }
    let m = problem.assemble();
    let lu = LuFactorization::new(&m).map_err(|_| CoupledError::SingularMonolithic)?;
    let mut rhs = problem.bf.clone();
    rhs.extend_from_slice(&problem.bs);
    let mut x = lu.solve(&rhs);
    let r = sub(&rhs, &m.matvec(&x));
    axpy(1.0, &lu.solve(&r), &mut x);
    let ls = x.split_off(n);
    Ok((x, ls))
}

/// Adaptive relaxation factor from the Aitken Δ² rule on the structural update.
#[derive(Debug, Clone)]
pub struct AitkenRelaxation {
    pub theta: f64,
    pub bounds: (f64, f64),
    prev_residual: Option<Vec<f64>>,
}

impl AitkenRelaxation {
    pub fn new(theta0: f64) -> Self {
        Self::with_bounds(theta0, (0.1, 1.0))
    }

    pub fn with_bounds(theta0: f64, bounds: (f64, f64)) -> Self {
        Self { theta: theta0.clamp(bounds.0, bounds.1), bounds, prev_residual: None }
    }

    /// Relaxed iterate `prev + θ (raw − prev)`, updating `θ` from the last two update
    /// residuals first.
    pub fn relax(&mut self, prev: &[f64], raw: &[f64]) -> Vec<f64> {
        let r = sub(raw, prev);
        if let Some(rp) = &self.prev_residual {
            let dr = sub(&r, rp);
            let den = dot(&dr, &dr);
            if den > 0.0 {
                self.theta = (-self.theta * dot(rp, &dr) / den).clamp(self.bounds.0, self.bounds.1);
            }
        }
        let out = prev.iter().zip(&r).map(|(p, ri)| p + self.theta * ri).collect();
        self.prev_residual = Some(r);
        out
    }
}

/// `λ_s = (1 − θ) λ_s_prev + θ Ks⁻¹(bs − Gsf λ_a)`, with `θ` from `aitken` when given.
pub fn structural_update(
    problem: &CoupledProblem,
    lambda_a: &[f64],
    lambda_s_prev: &[f64],
    theta_s: f64,
    aitken: Option<&mut AitkenRelaxation>,
) -> Result<Vec<f64>, CoupledError> {
    if lambda_a.len() != problem.n() || lambda_s_prev.len() != problem.n_s() {
        return Err(CoupledError::InvalidConfig("adjoint vector lengths do not match the problem".into()));
    }
    let lu = LuFactorization::new(&problem.ks).map_err(|_| CoupledError::SingularKs)?;
    let mut rhs = problem.bs.clone();
    axpy(-1.0, &problem.gsf.matvec(lambda_a), &mut rhs);
    let raw = lu.solve(&rhs);
    Ok(match aitken {
        Some(a) => a.relax(lambda_s_prev, &raw),
        None if theta_s == 1.0 => raw,
        None => lambda_s_prev.iter().zip(&raw).map(|(p, r)| (1.0 - theta_s) * p + theta_s * r).collect(),
    })
}

/// Fluid sub-solver family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluidSolver {
    Gmres { m: usize },
    GmresDr(DrParams),
    FgmresDr(DrParams),
    GcroDr(GcroParams),
    FgcroDr(GcroParams),
}

impl FluidSolver {
    pub fn recycles(&self) -> bool {
        matches!(self, Self::GcroDr(_) | Self::FgcroDr(_))
    }

    pub fn name(&self) -> String {
        match self {
            Self::Gmres { m } => format!("GMRES({m})"),
            Self::GmresDr(p) => format!("GMRES-DR({},{})", p.m, p.k),
            Self::FgmresDr(p) => format!("FGMRES-DR({},{})", p.m, p.k),
            Self::GcroDr(p) => format!("GCRO-DR({},{})", p.m, p.k),
            Self::FgcroDr(p) => format!("FGCRO-DR({},{},{:?})", p.m, p.k, p.strategy),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig {
    pub rho_trigger: f64,
    pub theta_s: f64,
    pub aitken: bool,
    pub aitken_bounds: (f64, f64),
    pub eps_a: f64,
    pub eps_s: f64,
    pub n_cpl: usize,
    /// First coupling cycle allowed to reuse the recycle space; `None` never recycles.
    pub recycle_from: Option<usize>,
    pub solver: FluidSolver,
    pub precond: PrecondSpec,
    /// Matvec budget over the whole run.
    pub max_matvecs: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            rho_trigger: 0.6,
            theta_s: 1.0,
            aitken: false,
            aitken_bounds: (0.1, 1.0),
            eps_a: 1e-6,
            eps_s: 1e-6,
            n_cpl: 100,
            recycle_from: None,
            solver: FluidSolver::GcroDr(GcroParams::new(30, 10)),
            precond: PrecondSpec::Identity,
            max_matvecs: 1_000_000,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<(), CoupledError> {
        let bad = |m: &str| Err(CoupledError::InvalidConfig(m.into()));
        if !(self.rho_trigger > 0.0 && self.rho_trigger < 1.0) {
            return bad("rho_trigger must lie in (0, 1)");
        }
        if !(self.theta_s > 0.0 && self.theta_s <= 1.0) {
            return bad("theta_s must lie in (0, 1]");
        }
        if !(self.eps_a > 0.0 && self.eps_s > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.n_cpl == 0 {
            return bad("n_cpl must be positive");
        }
        let (lo, hi) = self.aitken_bounds;
        if !(lo > 0.0 && lo <= hi) {
            return bad("aitken bounds must satisfy 0 < lo <= hi");
        }
        let stationary_only = matches!(self.solver, FluidSolver::Gmres { .. } | FluidSolver::GmresDr(_) | FluidSolver::GcroDr(_));
        if stationary_only && self.precond.is_variable() {
            return bad("non-flexible solvers need a stationary preconditioner");
        }
        Ok(())
    }
}

/// One coupling cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRecord {
    pub cycle: usize,
    pub lambda_s_norm: f64,
    pub r_a: f64,
    pub r_s: f64,
    pub matvecs: usize,
    /// Distance between the recycle image space rebuilt in this cycle and the previous one.
    pub d_p: Option<f64>,
    pub p: Option<usize>,
}

pub type CouplingHistory = Vec<CouplingRecord>;

#[derive(Debug, Clone)]
pub struct LbgsOutcome {
    pub lambda_a: Vec<f64>,
    pub lambda_s: Vec<f64>,
    pub history: CouplingHistory,
    /// Every fluid Krylov iteration, with one `coupling` row closing each sub-solve.
    pub record: ConvergenceRecord,
    pub converged: bool,
    pub total_matvecs: usize,
}

enum Fluid {
    Dr(DrSolver),
    Gcro(GcroDrSolver),
}

/// Partitioned block Gauss-Seidel solution of the coupled system.
///
/// An initial fluid solve with `λ_s = 0` is followed by coupling cycles of structural
/// update, fluid right-hand side update and an approximate fluid solve warm-started from
/// the previous `λ_a`. Each fluid solve stops once a Krylov cycle reduces the residual
/// below `ρ` times that of the previous cycle, or at `eps_a`. Recycling between fluid
/// solves starts at coupling `recycle_from`.
pub fn lbgs_solve(problem: &CoupledProblem, config: &PartitionConfig) -> Result<LbgsOutcome, CoupledError> {
    config.validate()?;
    let (n, ns) = (problem.n(), problem.n_s());
    let counted = CountedOperator::new(&problem.aff);
    let precond = config.precond.build(&problem.aff)?;
    let mut fluid = match config.solver {
        FluidSolver::Gmres { m } => Fluid::Dr(DrSolver::new(DrParams::new(m, 0))),
        FluidSolver::GmresDr(p) | FluidSolver::FgmresDr(p) => Fluid::Dr(DrSolver::new(p)),
        FluidSolver::GcroDr(p) => Fluid::Gcro(GcroDrSolver::new(GcroParams { flexible: false, ..p })),
        FluidSolver::FgcroDr(p) => Fluid::Gcro(GcroDrSolver::new(GcroParams { flexible: true, ..p })),
    };
    let bf_norm = norm(&problem.bf);
    if bf_norm == 0.0 {
        return Err(CoupledError::InvalidConfig("fluid right-hand side is zero".into()));
    }

    let mut aitken = config.aitken.then(|| AitkenRelaxation::with_bounds(config.theta_s, config.aitken_bounds));
    let mut la = vec![0.0; n];
    let mut ls = vec![0.0; ns];
    let mut record = ConvergenceRecord::new();
    let mut history = CouplingHistory::new();
    let mut prev_c: Option<Vec<Vec<f64>>> = None;

    let finish = |lambda_a, lambda_s, history, record, converged, counted: &CountedOperator<'_>| LbgsOutcome {
        lambda_a,
        lambda_s,
        history,
        record,
        converged,
        total_matvecs: counted.matvecs(),
    };

    for cycle in 0..=config.n_cpl {
        let ls_prev = ls.clone();
        if cycle > 0 {
            ls = structural_update(problem, &la, &ls, config.theta_s, aitken.as_mut())?;
        }
        let mut rhs = problem.bf.clone();
        axpy(1.0, &problem.gfs.matvec(&ls), &mut rhs);

        let remaining = config.max_matvecs.saturating_sub(counted.matvecs());
        if remaining == 0 {
            return Err(CoupledError::BudgetExhausted(Box::new(finish(la, ls, history, record, false, &counted))));
        }
        let control = SolveControl {
            tol: config.eps_a,
            max_matvecs: remaining,
            reference_norm: Some(bf_norm),
            ratio_trigger: Some(config.rho_trigger),
        };
        let ctx = RowContext { system_index: cycle, coupling_cycle: cycle };
        let (x, report) = match &mut fluid {
            Fluid::Dr(s) => s.solve(&counted, &precond, &rhs, &la, &control, ctx)?,
            Fluid::Gcro(s) => {
                let reuse = config.recycle_from.is_some_and(|from| cycle >= from);
                s.solve(&counted, &precond, &rhs, &la, &control, ctx, reuse)?
            }
        };
        la = x;
        let mut rows = report.history;
        if let Some(last) = rows.last_mut() {
            last.event = Event::Coupling;
        }
        record.extend(rows);

        let r_a = {
            let r = sub(&rhs, &problem.aff.apply_vec(&la));
            norm(&r) / bf_norm
        };
        let r_s = if cycle == 0 { 1.0 } else { norm(&sub(&ls, &ls_prev)) / norm(&ls).max(f64::MIN_POSITIVE) };
        let (mut d_p, mut p) = (None, None);
        if let Fluid::Gcro(s) = &fluid {
            // Only a space rebuilt during this coupling is compared; a solve that ends at
            // its warm start leaves the previous space untouched.
            if let Some(rs) = s.recycle_space().filter(|rs| rs.provenance.0 == cycle) {
                if let Some(pc) = &prev_c {
                    if let Ok(d) = grassmann_distance(pc, &rs.c) {
                        d_p = Some(d.d_p);
                        p = Some(d.p);
                    }
                }
                prev_c = Some(rs.c.clone());
            }
        }
        if let Some(last) = record.rows.last_mut() {
            (last.d_p, last.p) = (d_p, p);
        }
        history.push(CouplingRecord { cycle, lambda_s_norm: norm(&ls), r_a, r_s, matvecs: counted.matvecs(), d_p, p });
        log::debug!("coupling {cycle}: r_A {r_a:e} r_S {r_s:e} matvecs {}", counted.matvecs());

        if cycle > 0 && r_a <= config.eps_a && r_s <= config.eps_s {
            return Ok(finish(la, ls, history, record, true, &counted));
        }
        if diverging(&history) {
            let outcome = Box::new(finish(la, ls, history, record, false, &counted));
            return Err(CoupledError::DivergenceDetected { cycle, outcome });
        }
        if report.stop == StopReason::BudgetExhausted {
            return Err(CoupledError::BudgetExhausted(Box::new(finish(la, ls, history, record, false, &counted))));
        }
    }
    Err(CoupledError::MaxCouplings(Box::new(finish(la, ls, history, record, false, &counted))))
}

/// `r_A` rose at each of the last three couplings and by more than tenfold overall.
///
/// A single jump is not enough: a fluid solve cut short by the ratio trigger can leave
/// `r_A` well above a previous solve that happened to reach `eps_A`.
fn diverging(history: &[CouplingRecord]) -> bool {
    let [.., a, b, c, d] = history else { return false };
    a.r_a < b.r_a && b.r_a < c.r_a && c.r_a < d.r_a && d.r_a > 10.0 * a.r_a
}
