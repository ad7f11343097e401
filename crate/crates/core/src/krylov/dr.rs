use super::arnoldi::arnoldi_step;
use super::deflation::{harmonic_ritz_standard, harmonic_ritz_strategy_a, vtz_leading_block, DeflationSubspace};
use super::{
    discrepancy_exceeded, Recorder, RowContext, SolveControl, SolveReport, SolverError, StopReason, Strategy,
    DEFAULT_REFRESH_EVERY, DEFAULT_SAFEGUARD,
};
use crate::dense::DenseMatrix;
use crate::history::Event;
use crate::operators::{CountedOperator, LinearOperator, Preconditioner};
use crate::smallalg::{IncrementalLsq, SmallAlgError};
use crate::vecops::{axpy, basis_times, combine, dot, norm, project, scale, sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrParams {
    /// Krylov basis size per cycle.
    pub m: usize,
    /// Deflation size; `0` gives restarted (F)GMRES.
    pub k: usize,
    /// `A` or `B`; `C` is specific to the recycling solver.
    pub strategy: Strategy,
    /// Second modified Gram-Schmidt pass.
    pub reorth: bool,
    /// Relative true/least-squares discrepancy that triggers a cold restart.
    pub safeguard: f64,
    /// Cycles between fresh recomputations of the cached `VᵀZ` block.
    pub refresh_every: usize,
}

impl DrParams {
    pub fn new(m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            strategy: Strategy::B,
            reorth: true,
            safeguard: DEFAULT_SAFEGUARD,
            refresh_every: DEFAULT_REFRESH_EVERY,
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.m == 0 {
            return Err(SolverError::InvalidParameter("m must be positive".into()));
        }
        if self.k >= self.m {
            return Err(SolverError::InvalidParameter(format!("k = {} must be below m = {}", self.k, self.m)));
        }
        if self.strategy == Strategy::C {
            return Err(SolverError::InvalidParameter("strategy C needs the recycling solver".into()));
        }
        if self.refresh_every == 0 {
            return Err(SolverError::InvalidParameter("refresh_every must be positive".into()));
        }
        Ok(())
    }
}

impl Default for DrParams {
    fn default() -> Self {
        Self::new(120, 40)
    }
}

/// Snapshot handed to an inspector after every cycle.
pub struct DrCycleView<'a> {
    pub cycle: usize,
    pub v: &'a [Vec<f64>],
    /// Present in flexible mode or with strategy `A`.
    pub z: Option<&'a [Vec<f64>]>,
    pub hbar: &'a DenseMatrix,
    pub c: &'a [f64],
    pub y: &'a [f64],
    pub lsq_residual: f64,
    pub true_residual: f64,
    pub cold_restart: bool,
    pub deflation: Option<&'a DeflationSubspace>,
    /// Compacted basis `V P̄_{k+1}` that seeds the next cycle.
    pub next_v: Option<&'a [Vec<f64>]>,
    pub next_z: Option<&'a [Vec<f64>]>,
    pub next_hbar: Option<&'a DenseMatrix>,
}

struct Seed {
    v: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    hbar: DenseMatrix,
    vtz: Option<DenseMatrix>,
}

/// Restarted (F)GMRES with optional deflated restarting.
pub struct DrSolver {
    pub params: DrParams,
}

impl DrSolver {
    pub fn new(params: DrParams) -> Self {
        Self { params }
    }

    pub fn solve(
        &self,
        a: &CountedOperator<'_>,
        p: &Preconditioner,
        b: &[f64],
        x0: &[f64],
        control: &SolveControl,
        ctx: RowContext,
    ) -> Result<(Vec<f64>, SolveReport), SolverError> {
        self.solve_inspect(a, p, b, x0, control, ctx, &mut |_| {})
    }

    #[allow(clippy::too_many_arguments)]
    pub fn solve_inspect(
        &self,
        a: &CountedOperator<'_>,
        p: &Preconditioner,
        b: &[f64],
        x0: &[f64],
        control: &SolveControl,
        ctx: RowContext,
        inspect: &mut dyn FnMut(&DrCycleView<'_>),
    ) -> Result<(Vec<f64>, SolveReport), SolverError> {
        let prm = self.params;
        prm.validate()?;
        let n = a.dim();
        if b.len() != n || x0.len() != n {
            return Err(SolverError::InvalidParameter(format!("vectors must have length {n}")));
        }
        let store_z = p.is_variable() || prm.strategy == Strategy::A;
        let mut rec = Recorder::new(ctx, a.counter().clone());
        let refn = reference(control, b);

        let mut x = x0.to_vec();
        let mut r = residual(a, b, &x);
        let mut rt = norm(&r);
        rec.initial(rt / refn);
        if rt / refn <= control.tol {
            return Ok((x, rec.finish(StopReason::Converged, rt / refn, rt / refn)));
        }
        let step_cost = 1 + p.matvecs_per_apply();
        let mut prev_true = rt;
        let mut seed: Option<Seed> = None;
        let mut lsq_res = rt;

        loop {
            if rec.used() + step_cost + 1 > control.max_matvecs {
                return Ok((x, rec.finish(StopReason::BudgetExhausted, lsq_res / refn, rt / refn)));
            }
            let fresh = seed.is_none();
            let (mut v, mut z, mut cols, cached) = match seed.take() {
                None => {
                    let mut v0 = r.clone();
                    scale(1.0 / rt, &mut v0);
                    (vec![v0], Vec::new(), Vec::new(), None)
                }
                Some(s) => {
                    let cols: Vec<Vec<f64>> = s.hbar.columns();
                    (s.v, s.z, cols, s.vtz)
                }
            };
            let k0 = cols.len();
            let mut c = vec![0.0; prm.m + 1];
            if fresh {
                c[0] = rt;
            } else {
                c[..v.len()].copy_from_slice(&project(&v, &r));
            }
            let mut lsq = IncrementalLsq::new(c.clone());
            for col in &cols {
                lsq.push_column(col);
            }
            let mut breakdown = false;
            while cols.len() < prm.m {
                if rec.used() + step_cost + 1 > control.max_matvecs {
                    break;
                }
                let step = arnoldi_step(a, p, &mut v, &[], prm.reorth);
                if store_z {
                    z.push(step.z);
                }
                lsq_res = lsq.push_column(&step.h);
                cols.push(step.h);
                rec.iteration(lsq_res / refn);
                if step.breakdown {
                    breakdown = true;
                    break;
                }
                if lsq_res / refn <= control.tol {
                    break;
                }
            }
            let j = cols.len();
            if j == k0 {
                return Ok((x, rec.finish(StopReason::BudgetExhausted, lsq_res / refn, rt / refn)));
            }
            let (y, used) = solve_prefix(&lsq, &c, &cols)?;
            let dx = if store_z {
                combine(&z[..used], &y, n)
            } else {
                p.apply(a, &combine(&v[..used], &y, n))
            };
            axpy(1.0, &dx, &mut x);
            r = residual(a, b, &x);
            rt = norm(&r);
            rec.cycle_end(rt / refn);

            let hbar = DenseMatrix::from_fn(j + 1, j, |i, jj| cols[jj].get(i).copied().unwrap_or(0.0));
            let y_full = {
                let mut yy = y.clone();
                yy.resize(j, 0.0);
                yy
            };
            let c_cycle = c[..j + 1].to_vec();

            let mut stop = None;
            if rt / refn <= control.tol {
                stop = Some(StopReason::Converged);
            } else if control.ratio_trigger.is_some_and(|rho| rt < rho * prev_true) {
                stop = Some(StopReason::RatioTrigger);
            } else if rec.used() + step_cost + 1 > control.max_matvecs {
                stop = Some(StopReason::BudgetExhausted);
            }
            prev_true = rt;

            let mut cold = false;
            let mut defl = None;
            if stop.is_none() && prm.k > 0 {
                if breakdown || v.len() < j + 1 || discrepancy_exceeded(rt, lsq_res, prm.safeguard) {
                    cold = true;
                } else {
                    let vtz = if prm.strategy == Strategy::A {
                        let full = if rec.cycles() % prm.refresh_every == 0 { None } else { cached.as_ref() };
                        Some(vtz_product(&v, &z, full))
                    } else {
                        None
                    };
                    let d = match &vtz {
                        Some(vtz) => harmonic_ritz_strategy_a(&hbar, vtz, prm.k),
                        None => harmonic_ritz_standard(&hbar, prm.k),
                    };
                    match d {
                        Ok(d) if d.k() > 0 => defl = Some((d, vtz)),
                        Ok(_) => cold = true,
                        Err(e) => {
                            log::warn!("deflation failed ({e}); cold restart");
                            cold = true;
                        }
                    }
                }
            }

            if let Some((d, vtz)) = &defl {
                let kk = d.k();
                let pk1 = &d.pk1;
                let pkb = d.pk_bar();
                let nv = basis_times(&v, pk1, n);
                let nz = if store_z { basis_times(&z, &pkb, n) } else { Vec::new() };
                let nh = pk1.tr_matmul(&hbar.matmul(&pkb));
                let nvtz = vtz.as_ref().map(|m| vtz_leading_block(d, m));
                debug_assert_eq!(nh.shape(), (kk + 1, kk));
                inspect(&DrCycleView {
                    cycle: rec.cycles() - 1,
                    v: &v,
                    z: store_z.then_some(&z[..]),
                    hbar: &hbar,
                    c: &c_cycle,
                    y: &y_full,
                    lsq_residual: lsq_res,
                    true_residual: rt,
                    cold_restart: false,
                    deflation: Some(d),
                    next_v: Some(&nv),
                    next_z: store_z.then_some(&nz[..]),
                    next_hbar: Some(&nh),
                });
                seed = Some(Seed { v: nv, z: nz, hbar: nh, vtz: nvtz });
                rec.mark(Event::Restart);
            } else {
                inspect(&DrCycleView {
                    cycle: rec.cycles() - 1,
                    v: &v,
                    z: store_z.then_some(&z[..]),
                    hbar: &hbar,
                    c: &c_cycle,
                    y: &y_full,
                    lsq_residual: lsq_res,
                    true_residual: rt,
                    cold_restart: cold,
                    deflation: None,
                    next_v: None,
                    next_z: None,
                    next_hbar: None,
                });
                if stop.is_none() {
                    if cold {
                        log::debug!("cold restart at cycle {} (true {rt:e}, lsq {lsq_res:e})", rec.cycles());
                        rec.cold_restart();
                    } else {
                        rec.mark(Event::Restart);
                    }
                }
            }
            if let Some(s) = stop {
                return Ok((x, rec.finish(s, lsq_res / refn, rt / refn)));
            }
            lsq_res = rt;
        }
    }
}

/// Relative-residual denominator.
pub(crate) fn reference(control: &SolveControl, b: &[f64]) -> f64 {
    let r = control.reference_norm.unwrap_or_else(|| norm(b));
    if r > 0.0 {
        r
    } else {
        1.0
    }
}

/// `b − A x`, skipping the product when `x` is zero.
pub(crate) fn residual(a: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    if x.iter().all(|&v| v == 0.0) {
        b.to_vec()
    } else {
        sub(b, &a.apply_vec(x))
    }
}

/// Least-squares solution, falling back to the leading nonsingular columns.
pub(crate) fn solve_prefix(
    lsq: &IncrementalLsq,
    rhs: &[f64],
    cols: &[Vec<f64>],
) -> Result<(Vec<f64>, usize), SolverError> {
    match lsq.solve() {
        Ok(y) => Ok((y, cols.len())),
        Err(SmallAlgError::SingularTriangle { index }) if index > 0 => {
            log::warn!("least-squares triangle singular at column {index}; using the first {index} columns");
            let mut pre = IncrementalLsq::new(rhs.to_vec());
            for col in &cols[..index] {
                pre.push_column(col);
            }
            Ok((pre.solve()?, index))
        }
        Err(e) => Err(e.into()),
    }
}

/// `VᵀZ` of shape `(j+1) x j`, reusing a cached leading block when supplied.
pub(crate) fn vtz_product(v: &[Vec<f64>], z: &[Vec<f64>], cached: Option<&DenseMatrix>) -> DenseMatrix {
    let j = z.len();
    let (cr, cc) = cached.map_or((0, 0), |m| m.shape());
    DenseMatrix::from_fn(j + 1, j, |i, jj| {
        if i < cr && jj < cc {
            cached.expect("shape checked")[(i, jj)]
        } else {
            dot(&v[i], &z[jj])
        }
    })
}

fn run(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    params: DrParams,
    control: &SolveControl,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let counted = CountedOperator::new(a);
    DrSolver::new(params).solve(&counted, p, b, x0, control, RowContext::default())
}

/// Restarted right-preconditioned GMRES(m) without reorthogonalization.
pub fn gmres_solve(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    m: usize,
    control: &SolveControl,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    if p.is_variable() {
        return Err(SolverError::VariablePreconditioner);
    }
    run(a, p, b, x0, DrParams { reorth: false, ..DrParams::new(m, 0) }, control)
}

/// GMRES-DR(m, k) with a stationary preconditioner.
pub fn gmresdr_solve(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    params: DrParams,
    control: &SolveControl,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    if p.is_variable() {
        return Err(SolverError::VariablePreconditioner);
    }
    run(a, p, b, x0, params, control)
}

/// FGMRES-DR(m, m_i, k); `p` is typically an inner GMRES preconditioner.
pub fn fgmresdr_solve(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    b: &[f64],
    x0: &[f64],
    params: DrParams,
    control: &SolveControl,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    run(a, p, b, x0, params, control)
}
