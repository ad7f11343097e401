//! Per-iteration convergence records and their CSV form.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

pub const CSV_HEADER: &str = "system_index,coupling_cycle,solver_cycle,iteration,matvecs,lsq_residual_rel,true_residual_rel,event,d_p,p";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Event {
    #[default]
    None,
    Restart,
    ColdRestart,
    RecycleStart,
    Coupling,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::None => "none",
            Event::Restart => "restart",
            Event::ColdRestart => "cold_restart",
            Event::RecycleStart => "recycle_start",
            Event::Coupling => "coupling",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Event {
    type Err = HistoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => Event::None,
            "restart" => Event::Restart,
            "cold_restart" => Event::ColdRestart,
            "recycle_start" => Event::RecycleStart,
            "coupling" => Event::Coupling,
            other => return Err(HistoryError::Field { line: 0, reason: format!("unknown event `{other}`") }),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub system_index: usize,
    pub coupling_cycle: usize,
    pub solver_cycle: usize,
    pub iteration: usize,
    /// Cumulative operator applications of the whole run.
    pub matvecs: usize,
    pub lsq_residual_rel: f64,
    pub true_residual_rel: Option<f64>,
    pub event: Event,
    pub d_p: Option<f64>,
    pub p: Option<usize>,
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("line {line}: {reason}")]
    Field { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Ordered rows of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceRecord {
    pub rows: Vec<HistoryRow>,
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn real(v: f64) -> String {
    format!("{v:e}")
}

impl ConvergenceRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = HistoryRow>) {
        self.rows.extend(rows);
    }

    pub fn total_matvecs(&self) -> usize {
        self.rows.last().map_or(0, |r| r.matvecs)
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.system_index,
                r.coupling_cycle,
                r.solver_cycle,
                r.iteration,
                r.matvecs,
                real(r.lsq_residual_rel),
                opt(r.true_residual_rel.map(real)),
                r.event,
                opt(r.d_p.map(real)),
                opt(r.p),
            )?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self, HistoryError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| HistoryError::SchemaMismatch("empty file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let want: Vec<&str> = CSV_HEADER.split(',').collect();
        if let Some(missing) = want.iter().find(|c| !cols.contains(c)) {
            return Err(HistoryError::SchemaMismatch(format!("missing column `{missing}`")));
        }
        let pos = |name: &str| cols.iter().position(|c| *c == name).expect("checked above");
        let idx: Vec<usize> = want.iter().map(|c| pos(c)).collect();

        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = n + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(HistoryError::Field { line: lineno, reason: format!("expected {} fields", cols.len()) });
            }
            let get = |i: usize| f[idx[i]].trim();
            let bad = |what: &str| HistoryError::Field { line: lineno, reason: format!("bad {what}") };
            let uint = |i: usize, what: &str| get(i).parse::<usize>().map_err(|_| bad(what));
            let optf = |i: usize, what: &str| -> Result<Option<f64>, HistoryError> {
                let s = get(i);
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| bad(what))
                }
            };
            rows.push(HistoryRow {
                system_index: uint(0, "system_index")?,
                coupling_cycle: uint(1, "coupling_cycle")?,
                solver_cycle: uint(2, "solver_cycle")?,
                iteration: uint(3, "iteration")?,
                matvecs: uint(4, "matvecs")?,
                lsq_residual_rel: get(5).parse().map_err(|_| bad("lsq_residual_rel"))?,
                true_residual_rel: optf(6, "true_residual_rel")?,
                event: get(7).parse().map_err(|_: HistoryError| bad("event"))?,
                d_p: optf(8, "d_p")?,
                p: if get(9).is_empty() { None } else { Some(uint(9, "p")?) },
            });
        }
        Ok(Self { rows })
    }
}
