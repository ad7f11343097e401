//! Scenario files: TOML with `[problem]`, `[solver]` and `[partition]` sections.

use std::fmt;
use std::path::{Path, PathBuf};

use krylov_recycle::coupled::{FluidSolver, PartitionConfig};
use krylov_recycle::krylov::{DrParams, GcroParams};
use krylov_recycle::operators::PrecondSpec;
use krylov_recycle::Strategy;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Coupled,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub mode: Mode,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub partition: Option<PartitionSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Grid points per direction of the synthetic convection-diffusion operator.
    pub grid: Option<usize>,
    pub peclet: Option<f64>,
    /// Matrix Market file replacing the synthetic operator (single mode).
    pub matrix: Option<PathBuf>,
    pub rhs: Option<PathBuf>,
    pub n_s: Option<usize>,
    pub coupling_strength: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gmres,
    GmresDr,
    FgmresDr,
    GcroDr,
    FgcroDr,
}

impl Family {
    fn flexible(self) -> bool {
        matches!(self, Self::FgmresDr | Self::FgcroDr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondName {
    Identity,
    Jacobi,
    Ilu,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub family: Option<Family>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    /// Inner GMRES basis size of the flexible families.
    pub m_i: Option<usize>,
    pub strategy: Option<String>,
    /// Stationary preconditioner; the inner preconditioner of the flexible families.
    pub preconditioner: Option<PrecondName>,
    pub ilu_level: Option<usize>,
    pub tol: Option<f64>,
    pub max_matvecs: Option<usize>,
    pub reorth: Option<bool>,
    pub safeguard: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
enum RecycleEntry {
    Cycle(usize),
    Word(Never),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Never {
    Never,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
enum RecycleSetting {
    One(RecycleEntry),
    Sweep(Vec<RecycleEntry>),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub rho: Option<f64>,
    pub theta_s: Option<f64>,
    pub aitken: Option<bool>,
    pub eps_a: Option<f64>,
    pub eps_s: Option<f64>,
    pub n_cpl: Option<usize>,
    recycle_from: Option<RecycleSetting>,
}

/// Validated synthetic or file-backed fluid problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    ConvectionDiffusion { grid: usize, peclet: f64 },
    MatrixMarket { matrix: PathBuf, rhs: Option<PathBuf> },
    Coupled { grid: usize, peclet: f64, n_s: usize, coupling_strength: f64 },
}

/// One point of a `recycle_from` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecycleFrom(pub Option<usize>);

impl fmt::Display for RecycleFrom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => f.write_str("never"),
            Some(c) => write!(f, "{c}"),
        }
    }
}

/// Fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
    pub problem: ProblemSpec,
    pub solver: FluidSolver,
    pub precond: PrecondSpec,
    pub tol: f64,
    pub max_matvecs: usize,
    /// Coupled mode only; the `recycle_from` field is replaced per sweep point.
    pub partition: Option<PartitionConfig>,
    pub sweep: Vec<RecycleFrom>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn err(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), reason: reason.into() }
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(err(field, format!("must be a positive number, got {v}")))
    }
}

fn existing(field: &str, base: &Path, p: &Path) -> Result<PathBuf, CliError> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if full.is_file() {
        Ok(full)
    } else {
        Err(err(field, format!("file `{}` does not exist", full.display())))
    }
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| err("config", format!("{}: {e}", path.display())))?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| err("config", e.message().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_file(file, base, overrides)
    }

    /// Checks every parameter range and path; relative file paths resolve against `base`.
    pub fn from_file(file: ScenarioFile, base: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let coupled = file.mode == Mode::Coupled;
        let pr = &file.problem;
        let grid = pr.grid.unwrap_or(24);
        if !(3..=2048).contains(&grid) {
            return Err(err("problem.grid", format!("must lie in 3..=2048, got {grid}")));
        }
        let peclet = pr.peclet.unwrap_or(30.0);
        if !(peclet.is_finite() && peclet >= 0.0) {
            return Err(err("problem.peclet", "must be a finite non-negative number"));
        }
        let problem = if coupled {
            if pr.matrix.is_some() || pr.rhs.is_some() {
                return Err(err("problem.matrix", "coupled scenarios use the synthetic generator"));
            }
            let n_s = pr.n_s.unwrap_or(8);
            if !(1..=64).contains(&n_s) {
                return Err(err("problem.n_s", format!("must lie in 1..=64, got {n_s}")));
            }
            let coupling_strength = pr.coupling_strength.unwrap_or(16.0);
            if !(coupling_strength.is_finite() && coupling_strength >= 0.0) {
                return Err(err("problem.coupling_strength", "must be a finite non-negative number"));
            }
            ProblemSpec::Coupled { grid, peclet, n_s, coupling_strength }
        } else {
            if pr.n_s.is_some() || pr.coupling_strength.is_some() {
                return Err(err("problem.n_s", "structural parameters need mode = \"coupled\""));
            }
            match &pr.matrix {
                Some(m) => ProblemSpec::MatrixMarket {
                    matrix: existing("problem.matrix", base, m)?,
                    rhs: pr.rhs.as_deref().map(|r| existing("problem.rhs", base, r)).transpose()?,
                },
                None if pr.rhs.is_some() => return Err(err("problem.rhs", "a right-hand side file needs problem.matrix")),
                None => ProblemSpec::ConvectionDiffusion { grid, peclet },
            }
        };

        let (solver, precond) = solver_from(&file.solver)?;
        let tol = positive("solver.tol", file.solver.tol.unwrap_or(if coupled { 1e-6 } else { 1e-8 }))?;
        if tol >= 1.0 {
            return Err(err("solver.tol", "must be below 1"));
        }
        let max_matvecs = file.solver.max_matvecs.unwrap_or(1_000_000);
        if max_matvecs == 0 {
            return Err(err("solver.max_matvecs", "must be positive"));
        }

        let (partition, sweep) = match (coupled, &file.partition) {
            (false, Some(_)) => return Err(err("partition", "only valid with mode = \"coupled\"")),
            (false, None) => (None, vec![RecycleFrom(None)]),
            (true, section) => {
                let s = section.clone().unwrap_or_default();
                let cfg = PartitionConfig {
                    rho_trigger: s.rho.unwrap_or(0.6),
                    theta_s: s.theta_s.unwrap_or(1.0),
                    aitken: s.aitken.unwrap_or(false),
                    eps_a: positive("partition.eps_a", s.eps_a.unwrap_or(tol))?,
                    eps_s: positive("partition.eps_s", s.eps_s.unwrap_or(tol))?,
                    n_cpl: s.n_cpl.unwrap_or(100),
                    recycle_from: None,
                    solver,
                    precond: precond.clone(),
                    max_matvecs,
                    ..PartitionConfig::default()
                };
                if !(cfg.rho_trigger > 0.0 && cfg.rho_trigger < 1.0) {
                    return Err(err("partition.rho", "must lie in (0, 1)"));
                }
                if !(cfg.theta_s > 0.0 && cfg.theta_s <= 1.0) {
                    return Err(err("partition.theta_s", "must lie in (0, 1]"));
                }
                if !(1..=100_000).contains(&cfg.n_cpl) {
                    return Err(err("partition.n_cpl", "must lie in 1..=100000"));
                }
                let entries = match s.recycle_from {
                    None => vec![RecycleEntry::Word(Never::Never)],
                    Some(RecycleSetting::One(e)) => vec![e],
                    Some(RecycleSetting::Sweep(v)) if v.is_empty() => {
                        return Err(err("partition.recycle_from", "sweep must not be empty"))
                    }
                    Some(RecycleSetting::Sweep(v)) => v,
                };
                let sweep: Vec<RecycleFrom> = entries
                    .into_iter()
                    .map(|e| match e {
                        RecycleEntry::Cycle(c) => RecycleFrom(Some(c)),
                        RecycleEntry::Word(Never::Never) => RecycleFrom(None),
                    })
                    .collect();
                if sweep.iter().any(|r| r.0.is_some()) && !solver.recycles() {
                    return Err(err("partition.recycle_from", "recycling needs family gcro_dr or fgcro_dr"));
                }
                for (i, r) in sweep.iter().enumerate() {
                    if sweep[..i].contains(r) {
                        return Err(err("partition.recycle_from", format!("duplicate entry {r}")));
                    }
                }
                (Some(cfg), sweep)
            }
        };

        // `--out` is taken as given; a file `out` is relative to the scenario file.
        let out = match (&overrides.out, file.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) if o.is_relative() => base.join(o),
            (None, Some(o)) => o,
            (None, None) => PathBuf::from("out"),
        };
        let seed = overrides.seed.or(file.seed).unwrap_or(0);
        Ok(Self { mode: file.mode, seed, out, problem, solver, precond, tol, max_matvecs, partition, sweep })
    }
}

fn solver_from(s: &SolverSection) -> Result<(FluidSolver, PrecondSpec), CliError> {
    let family = s.family.unwrap_or(Family::GcroDr);
    let flexible = family.flexible();
    // Flexible defaults m = 70, m_i = 10, k = 35; otherwise m = 120, k = 40.
    let m = s.m.unwrap_or(if flexible { 70 } else { 120 });
    let k = match family {
        Family::Gmres => {
            if s.k.is_some_and(|k| k > 0) {
                return Err(err("solver.k", "plain GMRES has no deflation space"));
            }
            0
        }
        _ => s.k.unwrap_or(if flexible { 35 } else { 40 }),
    };
    if !(1..=10_000).contains(&m) {
        return Err(err("solver.m", format!("must lie in 1..=10000, got {m}")));
    }
    if family != Family::Gmres && (k == 0 || k >= m) {
        return Err(err("solver.k", format!("must lie in 1..m = {m}, got {k}")));
    }
    let strategy = match s.strategy.as_deref().map(str::to_ascii_uppercase).as_deref() {
        None | Some("B") => Strategy::B,
        Some("A") => Strategy::A,
        Some("C") if family == Family::FgcroDr => Strategy::C,
        Some("C") => return Err(err("solver.strategy", "strategy C needs family fgcro_dr")),
        Some(other) => return Err(err("solver.strategy", format!("unknown strategy `{other}`"))),
    };
    if s.strategy.is_some() && !flexible {
        return Err(err("solver.strategy", "strategies apply to the flexible families"));
    }
    let base = match s.preconditioner.unwrap_or(PrecondName::Identity) {
        PrecondName::Identity => PrecondSpec::Identity,
        PrecondName::Jacobi => PrecondSpec::Jacobi,
        PrecondName::Ilu => PrecondSpec::Ilu(s.ilu_level.unwrap_or(0)),
    };
    if s.ilu_level.is_some() && s.preconditioner != Some(PrecondName::Ilu) {
        return Err(err("solver.ilu_level", "needs preconditioner = \"ilu\""));
    }
    if s.ilu_level.is_some_and(|l| l > 8) {
        return Err(err("solver.ilu_level", "must be at most 8"));
    }
    let precond = if flexible {
        let m_i = s.m_i.unwrap_or(10);
        if !(1..=1000).contains(&m_i) {
            return Err(err("solver.m_i", format!("must lie in 1..=1000, got {m_i}")));
        }
        PrecondSpec::InnerGmres { m_i, inner: Box::new(base) }
    } else {
        if s.m_i.is_some() {
            return Err(err("solver.m_i", "inner GMRES applies to the flexible families"));
        }
        base
    };
    let safeguard = s.safeguard.unwrap_or(0.05);
    if !(safeguard.is_finite() && safeguard > 0.0) {
        return Err(err("solver.safeguard", "must be positive"));
    }
    let reorth = s.reorth.unwrap_or(true);
    let dr = DrParams { strategy, reorth, safeguard, ..DrParams::new(m, k) };
    let gcro = GcroParams { strategy, reorth, safeguard, flexible, ..GcroParams::new(m, k) };
    let solver = match family {
        Family::Gmres => FluidSolver::Gmres { m },
        Family::GmresDr => FluidSolver::GmresDr(dr),
        Family::FgmresDr => FluidSolver::FgmresDr(dr),
        Family::GcroDr => FluidSolver::GcroDr(gcro),
        Family::FgcroDr => FluidSolver::FgcroDr(gcro),
    };
    Ok((solver, precond))
}
