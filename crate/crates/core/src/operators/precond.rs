use super::{ilu_factor, CsrMatrix, IluFactorization, LinearOperator, OperatorError};
use crate::smallalg::{IncrementalLsq, SmallAlgError};
use crate::vecops::{axpy, combine, dot, norm, scale};

/// Right preconditioner `M⁻¹`. Only `InnerGmres` varies between applications.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    /// Stores the inverted diagonal.
    Jacobi(Vec<f64>),
    Ilu(IluFactorization),
    /// `m_i` GMRES steps from a zero guess, right-preconditioned by `inner`.
    InnerGmres { m_i: usize, inner: Box<Preconditioner> },
}

/// Recipe for a [`Preconditioner`], built against a concrete matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrecondSpec {
    Identity,
    Jacobi,
    Ilu(usize),
    InnerGmres { m_i: usize, inner: Box<PrecondSpec> },
}

impl PrecondSpec {
    pub fn build(&self, a: &CsrMatrix) -> Result<Preconditioner, OperatorError> {
        Ok(match self {
            Self::Identity => Preconditioner::Identity,
            Self::Jacobi => Preconditioner::jacobi(a)?,
            Self::Ilu(level) => Preconditioner::ilu(a, *level)?,
            Self::InnerGmres { m_i, inner } => Preconditioner::inner_gmres(*m_i, inner.build(a)?),
        })
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Self::InnerGmres { .. })
    }
}

impl Preconditioner {
    pub fn jacobi(a: &CsrMatrix) -> Result<Self, OperatorError> {
        let d = a.diagonal();
        if let Some(row) = d.iter().position(|&v| v == 0.0) {
            return Err(OperatorError::ZeroPivot { row });
        }
        Ok(Self::Jacobi(d.iter().map(|v| 1.0 / v).collect()))
    }

    /// ILU(k); a zero pivot triggers one retry on `A + 1e-8·‖A‖_∞ I`.
    pub fn ilu(a: &CsrMatrix, level: usize) -> Result<Self, OperatorError> {
        match ilu_factor(a, level) {
            Ok(f) => Ok(Self::Ilu(f)),
            Err(OperatorError::ZeroPivot { row }) => {
                let shift = 1e-8 * a.inf_norm();
                log::warn!("ILU({level}) hit a zero pivot in row {row}; retrying with diagonal shift {shift:e}");
                ilu_factor(&a.shifted(shift), level).map(Self::Ilu)
            }
            Err(e) => Err(e),
        }
    }

    pub fn inner_gmres(m_i: usize, inner: Preconditioner) -> Self {
        Self::InnerGmres { m_i, inner: Box::new(inner) }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Self::InnerGmres { .. })
    }

    /// Upper bound on operator applications spent inside one `apply`.
    pub fn matvecs_per_apply(&self) -> usize {
        match self {
            Self::InnerGmres { m_i, inner } => m_i * (1 + inner.matvecs_per_apply()),
            _ => 0,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Jacobi(_) => "jacobi".into(),
            Self::Ilu(f) => format!("ilu({})", f.level()),
            Self::InnerGmres { m_i, inner } => format!("gmres({m_i})+{}", inner.name()),
        }
    }

    /// `z = M(v)`. Inner GMRES applies `a` and so adds to its matvec count.
    pub fn apply(&self, a: &dyn LinearOperator, v: &[f64]) -> Vec<f64> {
        match self {
            Self::Identity => v.to_vec(),
            Self::Jacobi(dinv) => v.iter().zip(dinv).map(|(x, d)| x * d).collect(),
            Self::Ilu(f) => f.solve(v),
            Self::InnerGmres { m_i, inner } => inner_gmres(a, inner, v, *m_i),
        }
    }
}

/// One unrestarted cycle of flexible GMRES for `A z = v` from `z = 0`.
fn inner_gmres(a: &dyn LinearOperator, inner: &Preconditioner, v: &[f64], m_i: usize) -> Vec<f64> {
    let n = v.len();
    let beta = norm(v);
    if beta == 0.0 || m_i == 0 {
        return vec![0.0; n];
    }
    let mut rhs = vec![0.0; m_i + 1];
    rhs[0] = beta;
    let mut lsq = IncrementalLsq::new(rhs);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_i + 1);
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m_i);
    let mut v0 = v.to_vec();
    scale(1.0 / beta, &mut v0);
    basis.push(v0);
    let mut w = vec![0.0; n];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m_i);
    for j in 0..m_i {
        let z = inner.apply(a, &basis[j]);
        a.apply(&z, &mut w);
        zs.push(z);
        let wnorm = norm(&w);
        let mut col = vec![0.0; j + 2];
        for (i, b) in basis.iter().enumerate() {
            let h = dot(b, &w);
            axpy(-h, b, &mut w);
            col[i] = h;
        }
        let h = norm(&w);
        let breakdown = h <= 1e-14 * wnorm;
        col[j + 1] = if breakdown { 0.0 } else { h };
        lsq.push_column(&col);
        cols.push(col);
        if breakdown {
            break;
        }
        let mut next = w.clone();
        scale(1.0 / h, &mut next);
        basis.push(next);
    }
    match lsq.solve() {
        Ok(y) => combine(&zs, &y, n),
        Err(SmallAlgError::SingularTriangle { index }) => {
            let mut rhs = vec![0.0; m_i + 1];
            rhs[0] = beta;
            let mut prefix = IncrementalLsq::new(rhs);
            for col in &cols[..index] {
                prefix.push_column(col);
            }
            prefix.solve().map_or_else(|_| vec![0.0; n], |y| combine(&zs, &y, n))
        }
        Err(_) => vec![0.0; n],
    }
}
