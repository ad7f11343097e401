use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CsrMatrix, OperatorError};

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

fn parse_err(line: usize, reason: impl Into<String>) -> OperatorError {
    OperatorError::Parse { line, reason: reason.into() }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix, OperatorError> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

/// Coordinate-format reader; symmetric storage is expanded and indices made 0-based.
pub fn parse_matrix_market(reader: impl BufRead) -> Result<CsrMatrix, OperatorError> {
    let mut lines = reader.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let banner = banner?;
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix banner"));
    }
    if tokens[2] != "coordinate" {
        return Err(OperatorError::UnsupportedField(format!("format {}", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(OperatorError::UnsupportedField(other.to_string())),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(OperatorError::UnsupportedField(other.to_string())),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut stored = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line needs rows, cols, nnz"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| parse_err(lineno, e.to_string()));
                let (r, c, nnz) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                if r != c {
                    return Err(OperatorError::NonSquare { rows: r, cols: c });
                }
                size = Some((r, c, nnz));
                triplets.reserve(nnz * if symmetry == Symmetry::General { 1 } else { 2 });
            }
            Some((n, _, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "entry needs row, col, value"));
                }
                let idx = |s: &str| -> Result<usize, OperatorError> {
                    let v = s.parse::<usize>().map_err(|e| parse_err(lineno, e.to_string()))?;
                    if v == 0 || v > n {
                        return Err(parse_err(lineno, format!("index {v} outside 1..={n}")));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (idx(fields[0])?, idx(fields[1])?);
                let v: f64 = fields[2].parse().map_err(|e: std::num::ParseFloatError| parse_err(lineno, e.to_string()))?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                triplets.push((i, j, v));
                stored += 1;
                if i != j {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => triplets.push((j, i, v)),
                        Symmetry::Skew => triplets.push((j, i, -v)),
                    }
                }
            }
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if stored != nnz {
        return Err(parse_err(0, format!("header declares {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(n, triplets)
}

/// Writes general coordinate format with round-trip exact values.
pub fn write_matrix_market(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<(), OperatorError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_rhs(path: impl AsRef<Path>) -> Result<Vec<f64>, OperatorError> {
    parse_rhs(BufReader::new(File::open(path)?))
}

/// Matrix Market array format (single column), or plain text with one value per line.
pub fn parse_rhs(reader: impl BufRead) -> Result<Vec<f64>, OperatorError> {
    let mut out = Vec::new();
    let mut expect: Option<usize> = None;
    let mut is_mm = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if idx == 0 && t.to_ascii_lowercase().starts_with("%%matrixmarket") {
            let tokens: Vec<String> = t.split_whitespace().map(str::to_ascii_lowercase).collect();
            if tokens.get(2).map(String::as_str) != Some("array") {
                return Err(OperatorError::UnsupportedField("right-hand side must use array format".into()));
            }
            if let Some(field) = tokens.get(3) {
                if !matches!(field.as_str(), "real" | "integer" | "double") {
                    return Err(OperatorError::UnsupportedField(field.clone()));
                }
            }
            is_mm = true;
            continue;
        }
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        if is_mm && expect.is_none() {
            let dims: Vec<usize> = t
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| parse_err(lineno, e.to_string())))
                .collect::<Result<_, _>>()?;
            if dims.len() != 2 || dims[1] != 1 {
                return Err(parse_err(lineno, "array size line must be `n 1`"));
            }
            expect = Some(dims[0]);
            continue;
        }
        let v: f64 = t.parse().map_err(|e: std::num::ParseFloatError| parse_err(lineno, e.to_string()))?;
        out.push(v);
    }
    if let Some(n) = expect {
        if out.len() != n {
            return Err(parse_err(0, format!("expected {n} values, found {}", out.len())));
        }
    }
    Ok(out)
}

pub fn write_rhs(path: impl AsRef<Path>, b: &[f64]) -> Result<(), OperatorError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", b.len())?;
    for v in b {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}
