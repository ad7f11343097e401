//! Side-by-side totals of several `history.csv` files.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use krylov_recycle::ConvergenceRecord;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub label: String,
    pub total_matvecs: usize,
    /// Relative to the first run; positive when cheaper.
    pub saving_percent: f64,
    pub final_lsq: f64,
    pub final_true: Option<f64>,
    pub couplings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub runs: Vec<RunStats>,
}

fn stats(label: String, record: &ConvergenceRecord) -> RunStats {
    let last = record.rows.last();
    RunStats {
        label,
        total_matvecs: record.total_matvecs(),
        saving_percent: 0.0,
        final_lsq: last.map_or(f64::NAN, |r| r.lsq_residual_rel),
        final_true: record.rows.iter().rev().find_map(|r| r.true_residual_rel),
        // Cycle 0 is the initial fluid solve, not a coupling.
        couplings: record.rows.iter().filter(|r| r.event == krylov_recycle::Event::Coupling).count().saturating_sub(1),
    }
}

/// Reads each history and reports totals and savings against the first one.
pub fn compare_runs(paths: &[PathBuf]) -> Result<Comparison, CliError> {
    if paths.len() < 2 {
        return Err(CliError::Config { field: "compare".into(), reason: "needs at least two histories".into() });
    }
    let mut runs = Vec::with_capacity(paths.len());
    for p in paths {
        let f = File::open(p).map_err(|e| CliError::io(p, e))?;
        let record = ConvergenceRecord::read_csv(BufReader::new(f))
            .map_err(|source| CliError::History { path: p.clone(), source })?;
        runs.push(stats(p.display().to_string(), &record));
    }
    let base = runs[0].total_matvecs as f64;
    for r in &mut runs {
        r.saving_percent = if base > 0.0 { 100.0 * (base - r.total_matvecs as f64) / base } else { 0.0 };
    }
    Ok(Comparison { runs })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.runs.iter().map(|r| r.label.len()).max().unwrap_or(3).max(3);
        writeln!(f, "{:<w$}  {:>8}  {:>9}  {:>9}  {:>12}  {:>12}", "run", "matvecs", "saving", "couplings", "final_lsq", "final_true")?;
        for r in &self.runs {
            let t = r.final_true.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
            writeln!(
                f,
                "{:<w$}  {:>8}  {:>8.2}%  {:>9}  {:>12.3e}  {:>12}",
                r.label, r.total_matvecs, r.saving_percent, r.couplings, r.final_lsq, t
            )?;
        }
        Ok(())
    }
}
