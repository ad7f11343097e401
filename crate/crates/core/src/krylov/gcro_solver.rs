use super::arnoldi::arnoldi_step;
use super::deflation::{corrected, square_part};
use super::dr::{reference, residual, solve_prefix};
use super::gcro::{
    gcro_harmonic_ritz, recycle_coefficients, strategy_b_spectrum, update_recycle_space, warm_start_from,
    RecycleSpace,
};
use super::{
    discrepancy_exceeded, Recorder, RowContext, SolveControl, SolveReport, SolverError, StopReason, Strategy,
    DEFAULT_REFRESH_EVERY, DEFAULT_SAFEGUARD,
};
use crate::dense::DenseMatrix;
use crate::history::Event;
use crate::operators::{CountedOperator, LinearOperator, Preconditioner};
use crate::smallalg::{grassmann_distance, small_standard_eig, EigenPairSet, IncrementalLsq, SubspaceDistance};
use crate::vecops::{axpy, combine, dot, gram, norm, project, scale};

/// Which systems of a sequence start from the retained recycle space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecyclePolicy {
    Never,
    /// Systems with index at or above the given one.
    FromSystem(usize),
    #[default]
    Always,
}

impl RecyclePolicy {
    pub fn allows(self, system: usize) -> bool {
        match self {
            Self::Never => false,
            Self::FromSystem(i) => system >= i,
            Self::Always => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcroParams {
    pub m: usize,
    /// Deflation and recycling size.
    pub k: usize,
    /// Flexible variant (explicit `Z` storage, identity leading block).
    pub flexible: bool,
    /// Deflation strategy of the flexible variant.
    pub strategy: Strategy,
    pub reorth: bool,
    pub safeguard: f64,
    /// Cycles between fresh recomputations of the cached head block.
    pub refresh_every: usize,
    /// Verify `A·M(U) = C` before each warm start, discarding the space above this tolerance.
    pub stale_check: Option<f64>,
    /// Form every row of the Krylov–recycle coupling block explicitly instead of only the first.
    pub explicit_head: bool,
}

impl GcroParams {
    pub fn new(m: usize, k: usize) -> Self {
        Self {
            m,
            k,
            flexible: false,
            strategy: Strategy::B,
            reorth: true,
            safeguard: DEFAULT_SAFEGUARD,
            refresh_every: DEFAULT_REFRESH_EVERY,
            stale_check: None,
            explicit_head: false,
        }
    }

    pub fn flexible(m: usize, k: usize, strategy: Strategy) -> Self {
        Self { flexible: true, strategy, ..Self::new(m, k) }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.m == 0 || self.k >= self.m {
            return Err(SolverError::InvalidParameter(format!("need 0 <= k < m, got m = {}, k = {}", self.m, self.k)));
        }
        if self.refresh_every == 0 {
            return Err(SolverError::InvalidParameter("refresh_every must be positive".into()));
        }
        Ok(())
    }
}

impl Default for GcroParams {
    fn default() -> Self {
        Self::new(120, 40)
    }
}

/// State of one finished GCRO-DR cycle.
pub struct GcroCycleView<'a> {
    pub system_index: usize,
    pub cycle: usize,
    /// Recycle space the cycle was orthogonalized against.
    pub recycled: Option<&'a RecycleSpace>,
    /// `(w+1) x w` composite matrix of the cycle.
    pub hbar: &'a DenseMatrix,
    /// `Ŵ = [C, V]`
    pub what: &'a [Vec<f64>],
    /// `V̂ = [Ũ, V]` (flexible: `[Z_k, Z]`).
    pub vhat: &'a [Vec<f64>],
    /// Coupling block `Cᵀ A V` (flexible: `Cᵀ A Z`).
    pub b_block: &'a DenseMatrix,
    /// `[Cᵀr; βe₁]`
    pub rhs: &'a [f64],
    /// `[z; y]`
    pub coords: &'a [f64],
    /// True residual after the update.
    pub residual: &'a [f64],
    pub r0_norm: f64,
    pub lsq_residual: f64,
    pub true_residual: f64,
    pub cold_restart: bool,
    pub eig: Option<&'a EigenPairSet>,
    pub updated: Option<&'a RecycleSpace>,
    pub distance: Option<SubspaceDistance>,
}

pub enum GcroEvent<'a> {
    WarmStart { recycle: &'a RecycleSpace, residual: &'a [f64], r0_norm: f64 },
    Cycle(GcroCycleView<'a>),
}

/// GCRO-DR / FGCRO-DR instance that keeps its recycle space between solves.
pub struct GcroDrSolver {
    pub params: GcroParams,
    recycle: Option<RecycleSpace>,
    last_c: Option<Vec<Vec<f64>>>,
    warm_started: bool,
    cycles_total: usize,
}

impl GcroDrSolver {
    pub fn new(params: GcroParams) -> Self {
        Self { params, recycle: None, last_c: None, warm_started: false, cycles_total: 0 }
    }

    pub fn recycle_space(&self) -> Option<&RecycleSpace> {
        self.recycle.as_ref()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        a: &CountedOperator<'_>,
        p: &Preconditioner,
        b: &[f64],
        x0: &[f64],
        control: &SolveControl,
        ctx: RowContext,
        use_recycle: bool,
    ) -> Result<(Vec<f64>, SolveReport), SolverError> {
        self.solve_inspect(a, p, b, x0, control, ctx, use_recycle, &mut |_| {})
    }

    #[allow(clippy::too_many_arguments)]
    pub fn solve_inspect(
        &mut self,
        a: &CountedOperator<'_>,
        p: &Preconditioner,
        b: &[f64],
        x0: &[f64],
        control: &SolveControl,
        ctx: RowContext,
        use_recycle: bool,
        inspect: &mut dyn FnMut(&GcroEvent<'_>),
    ) -> Result<(Vec<f64>, SolveReport), SolverError> {
        let prm = self.params;
        prm.validate()?;
        if p.is_variable() && !prm.flexible {
            return Err(SolverError::VariablePreconditioner);
        }
        let n = a.dim();
        if b.len() != n || x0.len() != n {
            return Err(SolverError::InvalidParameter(format!("vectors must have length {n}")));
        }
        let flex = prm.flexible;
        let mut rec = Recorder::new(ctx, a.counter().clone());
        let refn = reference(control, b);
        let step_cost = 1 + p.matvecs_per_apply();

        let mut x = x0.to_vec();
        let mut r = residual(a, b, &x);
        let mut rt = norm(&r);
        let r0n = rt;
        rec.initial(rt / refn);
        if rt / refn <= control.tol {
            return Ok((x, rec.finish(StopReason::Converged, rt / refn, rt / refn)));
        }

        let mut active = if use_recycle { self.recycle.clone() } else { None };
        if let (Some(rs), Some(tol)) = (&active, prm.stale_check) {
            let residual = rs.invariant_residual(a, p);
            if residual > tol {
                log::warn!("recycle space is stale (A·M(U) − C residual {residual:e}); cold start");
                active = None;
            }
        }
        // A warm-started space is not contained in range(Ŵ), so the rows v_iᵀŨ (i ≥ 2)
        // no longer vanish; they stay explicit until a cold restart rebuilds the space.
        let mut inherited = false;
        let mut mark_recycle = false;
        if let Some(rs) = &active {
            let (x1, r1) = warm_start_from(rs, a, p, &x, r);
            x = x1;
            r = r1;
            inspect(&GcroEvent::WarmStart { recycle: rs, residual: &r, r0_norm: r0n });
            inherited = true;
            if !self.warm_started {
                self.warm_started = true;
                mark_recycle = true;
            }
        }
        let mut lsq_res = norm(&r);
        let mut prev_true = r0n;
        let empty: Vec<Vec<f64>> = Vec::new();

        loop {
            if rec.used() + step_cost + 1 > control.max_matvecs {
                self.recycle = active;
                return Ok((x, rec.finish(StopReason::BudgetExhausted, lsq_res / refn, rt / refn)));
            }
            let kk = active.as_ref().map_or(0, RecycleSpace::k);
            let steps = prm.m - kk;
            let cvecs: &[Vec<f64>] = active.as_ref().map_or(&empty, |rs| &rs.c);

            let mut cr = project(cvecs, &r);
            let mut rp = r.clone();
            for (ci, &t) in cvecs.iter().zip(&cr) {
                axpy(-t, ci, &mut rp);
            }
            if prm.reorth && kk > 0 {
                let c2 = project(cvecs, &rp);
                for ((ci, &t), acc) in cvecs.iter().zip(&c2).zip(cr.iter_mut()) {
                    axpy(-t, ci, &mut rp);
                    *acc += t;
                }
            }
            let beta = norm(&rp);
            let mut rhs = vec![0.0; steps + 1];
            rhs[0] = beta;
            let mut lsq = IncrementalLsq::new(rhs.clone());
            let mut v: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
            let mut zs: Vec<Vec<f64>> = Vec::with_capacity(if flex { steps } else { 0 });
            let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(steps);
            let mut bcols: Vec<Vec<f64>> = Vec::with_capacity(steps);
            let mut breakdown = beta == 0.0;
            lsq_res = beta;
            if !breakdown {
                let mut v0 = rp;
                scale(1.0 / beta, &mut v0);
                v.push(v0);
                while hcols.len() < steps {
                    if rec.used() + step_cost + 1 > control.max_matvecs {
                        break;
                    }
                    let step = arnoldi_step(a, p, &mut v, cvecs, prm.reorth);
                    if flex {
                        zs.push(step.z);
                    }
                    lsq_res = lsq.push_column(&step.h);
                    hcols.push(step.h);
                    bcols.push(step.b);
                    rec.iteration(lsq_res / refn);
                    if mark_recycle {
                        rec.mark(Event::RecycleStart);
                        mark_recycle = false;
                    }
                    if step.breakdown {
                        breakdown = true;
                        break;
                    }
                    if lsq_res / refn <= control.tol {
                        break;
                    }
                }
            }
            let jn = hcols.len();
            if jn == 0 && !breakdown {
                self.recycle = active;
                return Ok((x, rec.finish(StopReason::BudgetExhausted, lsq_res / refn, rt / refn)));
            }
            let (y, used) = if jn == 0 { (Vec::new(), 0) } else { solve_prefix(&lsq, &rhs, &hcols)? };
            let bmat = DenseMatrix::from_fn(kk, jn, |i, c| bcols[c][i]);
            let bused = bmat.block(0, kk, 0, used);
            let ones = vec![1.0; kk];
            let ucoef = recycle_coefficients(&bused, &ones, &cr, &y);
            let dx = match &active {
                Some(rs) if flex => {
                    let mut t = combine(&rs.u, &ucoef, n);
                    axpy(1.0, &combine(&zs[..used], &y, n), &mut t);
                    t
                }
                Some(rs) => {
                    let mut t = combine(&rs.u, &ucoef, n);
                    axpy(1.0, &combine(&v[..used], &y, n), &mut t);
                    p.apply(a, &t)
                }
                None if flex => combine(&zs[..used], &y, n),
                None => p.apply(a, &combine(&v[..used], &y, n)),
            };
            axpy(1.0, &dx, &mut x);
            r = residual(a, b, &x);
            rt = norm(&r);
            rec.cycle_end(rt / refn);
            let cycle_index = rec.cycles() - 1;
            self.cycles_total += 1;

            let mut stop = None;
            if rt / refn <= control.tol {
                stop = Some(StopReason::Converged);
            } else if control.ratio_trigger.is_some_and(|rho| rt < rho * prev_true) {
                stop = Some(StopReason::RatioTrigger);
            } else if rec.used() + step_cost + 1 > control.max_matvecs {
                stop = Some(StopReason::BudgetExhausted);
            }
            prev_true = rt;
            let cold = stop.is_none() && (breakdown || discrepancy_exceeded(rt, lsq_res, prm.safeguard));

            // Composite cycle matrices.
            let w = kk + jn;
            let d = active.as_ref().map_or_else(Vec::new, |rs| rs.d.clone());
            let mut hfull = DenseMatrix::zeros(w + 1, w);
            for i in 0..kk {
                hfull[(i, i)] = if flex { 1.0 } else { d[i] };
            }
            hfull.set_block(0, kk, &bmat);
            for (c, col) in hcols.iter().enumerate() {
                for (i, &h) in col.iter().enumerate() {
                    hfull[(kk + i, kk + c)] = h;
                }
            }
            let mut what: Vec<Vec<f64>> = cvecs.to_vec();
            what.extend(v.iter().cloned());
            let mut vhat: Vec<Vec<f64>> = match &active {
                Some(rs) if flex => rs.u.clone(),
                Some(rs) => rs.u_tilde(),
                None => Vec::new(),
            };
            if flex {
                vhat.extend(zs.iter().cloned());
            } else {
                vhat.extend(v.iter().take(jn).cloned());
            }

            let mut eig = None;
            let mut updated = None;
            let mut distance = None;
            let feasible = !cold && !breakdown && prm.k > 0 && w >= 2 && what.len() == w + 1;
            if feasible {
                let explicit = inherited || prm.explicit_head;
                let (pencil, aux) = self.pencil(&active, &what, &vhat, &v, jn, explicit);
                match self.deflation(&hfull, &bmat, &hcols, kk, pencil.as_ref()) {
                    Ok(set) if !set.is_empty() => {
                        let aux_ref = aux.as_deref();
                        let head_g = if flex && prm.strategy == Strategy::B { None } else { pencil.as_ref() };
                        match update_recycle_space(
                            &hfull,
                            &what,
                            &vhat,
                            &set.vectors,
                            flex,
                            aux_ref,
                            head_g,
                            (ctx.system_index, cycle_index),
                        ) {
                            Ok(mut rs) => {
                                if self.cycles_total % prm.refresh_every == 0 {
                                    refresh_head(&mut rs, flex, prm.strategy);
                                }
                                if let Some(prev) = &self.last_c {
                                    match grassmann_distance(prev, &rs.c) {
                                        Ok(dist) => {
                                            rec.distance(dist.d_p, dist.p);
                                            distance = Some(dist);
                                        }
                                        Err(e) => log::warn!("subspace distance unavailable: {e}"),
                                    }
                                }
                                self.last_c = Some(rs.c.clone());
                                updated = Some(rs);
                            }
                            Err(e) => log::warn!("recycle update failed ({e}); keeping previous space"),
                        }
                        eig = Some(set);
                    }
                    Ok(_) => {}
                    Err(e) => log::warn!("deflation eigenproblem failed ({e})"),
                }
            }

            let mut coords: Vec<f64> = if flex { ucoef.clone() } else { ucoef.iter().zip(&d).map(|(u, di)| u / di).collect() };
            coords.extend_from_slice(&y);
            coords.resize(w, 0.0);
            let mut full_rhs = cr.clone();
            full_rhs.extend_from_slice(&rhs[..jn + 1]);
            inspect(&GcroEvent::Cycle(GcroCycleView {
                system_index: ctx.system_index,
                cycle: cycle_index,
                recycled: active.as_ref(),
                hbar: &hfull,
                what: &what,
                vhat: &vhat,
                b_block: &bmat,
                rhs: &full_rhs,
                coords: &coords,
                residual: &r,
                r0_norm: r0n,
                lsq_residual: lsq_res,
                true_residual: rt,
                cold_restart: cold,
                eig: eig.as_ref(),
                updated: updated.as_ref(),
                distance,
            }));

            if cold {
                log::debug!("cold restart at cycle {cycle_index} (true {rt:e}, lsq {lsq_res:e})");
                rec.cold_restart();
                active = None;
                inherited = false;
            } else {
                if updated.is_some() {
                    active = updated;
                }
                if stop.is_none() {
                    rec.mark(Event::Restart);
                }
            }
            if let Some(s) = stop {
                self.recycle = active;
                return Ok((x, rec.finish(s, lsq_res / refn, rt / refn)));
            }
            lsq_res = rt;
        }
    }

    /// `ŴᵀV̂` (or `ŴᵀW_m` for strategy C) as used by the deflation eigenproblem; `None`
    /// when the problem needs no pencil.
    fn pencil(
        &self,
        active: &Option<RecycleSpace>,
        what: &[Vec<f64>],
        vhat: &[Vec<f64>],
        v: &[Vec<f64>],
        jn: usize,
        explicit: bool,
    ) -> (Option<DenseMatrix>, Option<Vec<Vec<f64>>>) {
        let prm = self.params;
        let w = vhat.len();
        let kk = w - jn;
        let strategy = if prm.flexible { prm.strategy } else { Strategy::C };
        match (prm.flexible, strategy) {
            (true, Strategy::A) => {
                let cached = active.as_ref().map(|rs| &rs.head);
                let g = DenseMatrix::from_fn(w + 1, w, |i, c| match cached {
                    Some(h) if i < kk && c < kk => h[(i, c)],
                    _ => dot(&what[i], &vhat[c]),
                });
                (Some(g), None)
            }
            (true, Strategy::B) => (None, None),
            (_, _) => {
                // Non-flexible uses the scaled solution basis; strategy C its auxiliary basis.
                let (left, aux): (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) = match active {
                    Some(rs) if prm.flexible => {
                        let wk = rs.w.clone().unwrap_or_else(|| rs.u.clone());
                        let mut wm = wk.clone();
                        wm.extend(v.iter().take(jn).cloned());
                        (wk, Some(wm))
                    }
                    Some(rs) => (rs.u_tilde(), None),
                    None => (Vec::new(), prm.flexible.then(|| v[..jn].to_vec())),
                };
                let mut g = DenseMatrix::zeros(w + 1, w);
                if let Some(rs) = active {
                    g.set_block(0, 0, &rs.head);
                }
                for (row, vi) in v.iter().enumerate().take(jn + 1) {
                    if row > 0 && !explicit {
                        break;
                    }
                    for (c, u) in left.iter().enumerate() {
                        g[(kk + row, c)] = dot(vi, u);
                    }
                }
                for i in 0..jn {
                    g[(kk + i, kk + i)] = 1.0;
                }
                (Some(g), aux)
            }
        }
    }

    fn deflation(
        &self,
        hfull: &DenseMatrix,
        bmat: &DenseMatrix,
        hcols: &[Vec<f64>],
        kk: usize,
        pencil: Option<&DenseMatrix>,
    ) -> Result<EigenPairSet, SolverError> {
        let prm = self.params;
        let w = hfull.cols();
        let keep = prm.k.min(w - 1);
        let standard = || -> Result<EigenPairSet, SolverError> {
            let (h, f, delta) = square_part(hfull)?;
            Ok(small_standard_eig(&corrected(&h, &f, delta), w)?.truncate(keep, w - 1))
        };
        if prm.flexible && prm.strategy == Strategy::B {
            let jn = hcols.len();
            let hsmall = DenseMatrix::from_fn(jn + 1, jn, |i, c| hcols[c].get(i).copied().unwrap_or(0.0));
            return match strategy_b_spectrum(bmat, &hsmall) {
                Ok(set) => Ok(set.truncate(keep, w - 1)),
                Err(SolverError::StrategyBDegenerate) => {
                    log::warn!("closed-form strategy B spectrum degenerate; using the full eigenproblem");
                    standard()
                }
                Err(e) => Err(e),
            };
        }
        let first_a = prm.flexible && prm.strategy == Strategy::A;
        if kk == 0 && !first_a {
            return standard();
        }
        let g = pencil.expect("pencil formed for this strategy");
        gcro_harmonic_ritz(hfull, g, prm.k)
    }
}

/// Recomputes the cached head block from the stored bases.
fn refresh_head(rs: &mut RecycleSpace, flexible: bool, strategy: Strategy) {
    rs.head = if !flexible {
        gram(&rs.c, &rs.u_tilde())
    } else if strategy == Strategy::C {
        gram(&rs.c, rs.w.as_ref().unwrap_or(&rs.u))
    } else {
        gram(&rs.c, &rs.u)
    };
}

fn run_sequence(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    sequence: &[(Vec<f64>, Vec<f64>)],
    params: GcroParams,
    control: &SolveControl,
    policy: RecyclePolicy,
) -> Result<Vec<(Vec<f64>, SolveReport)>, SolverError> {
    let counted = CountedOperator::new(a);
    let mut solver = GcroDrSolver::new(params);
    sequence
        .iter()
        .enumerate()
        .map(|(i, (b, x0))| {
            let ctx = RowContext { system_index: i, coupling_cycle: i };
            solver.solve(&counted, p, b, x0, control, ctx, policy.allows(i))
        })
        .collect()
}

/// GCRO-DR(m, k) over a sequence of right-hand sides `(b, x0)` sharing one operator.
pub fn gcrodr_solve(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    sequence: &[(Vec<f64>, Vec<f64>)],
    params: GcroParams,
    control: &SolveControl,
    policy: RecyclePolicy,
) -> Result<Vec<(Vec<f64>, SolveReport)>, SolverError> {
    run_sequence(a, p, sequence, GcroParams { flexible: false, ..params }, control, policy)
}

/// FGCRO-DR(m, m_i, k) with the chosen deflation strategy.
pub fn fgcrodr_solve(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    sequence: &[(Vec<f64>, Vec<f64>)],
    params: GcroParams,
    control: &SolveControl,
    policy: RecyclePolicy,
) -> Result<Vec<(Vec<f64>, SolveReport)>, SolverError> {
    run_sequence(a, p, sequence, GcroParams { flexible: true, ..params }, control, policy)
}
