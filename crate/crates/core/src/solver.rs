//! Fully corrective Frank-Wolfe search for an incompatibility certificate,
//! and bisection over a visibility grid.

use std::time::Instant;

use log::{debug, info, warn};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::certificate::{check_vector, Certificate, Verdict};
use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::events::InflationGraph;
use crate::exact::{floor_scaled, IntVec};
use crate::problem::ReducedProblem;
use crate::qp::{min_norm_point_with, ActiveSet, SubproblemSolution, PIVOT_THRESHOLD};
use crate::target::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Round the max-gap direction `w*`.
    Dual,
    /// Round the min-norm point `x*` itself.
    Primal,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Rounding scale `N` of `w_int = ⌊N w⌋`.
    pub scale_n: u64,
    /// `s_active` below this times the largest active-vertex norm counts as
    /// zero.
    pub zero_tol: f64,
    /// Defaults to `4 n_cons + 100`.
    pub max_iterations: Option<usize>,
    /// Worker threads for the LMO; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Relative tolerance of the min-norm subproblem.
    pub qp_tol: f64,
    pub branch: Branch,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scale_n: 1 << 20,
            zero_tol: 1e-9,
            max_iterations: None,
            workers: None,
            qp_tol: 1e-12,
            branch: Branch::Dual,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale_n == 0 || self.max_iterations == Some(0) || self.workers == Some(0) {
            return Err(Error::InvalidConstraint("solver scale, iteration cap and workers must be positive".into()));
        }
        if !(self.zero_tol > 0.0 && self.qp_tol > 0.0) {
            return Err(Error::InvalidConstraint("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum SolveStatus {
    Incompatible(Box<Certificate>),
    Inconclusive,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub iterations: usize,
    pub active_size: usize,
    pub s_active: f64,
}

impl SolveOutcome {
    pub fn is_incompatible(&self) -> bool {
        matches!(self.status, SolveStatus::Incompatible(_))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match &self.status {
            SolveStatus::Incompatible(c) => Some(c),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.status {
            SolveStatus::Incompatible(_) => "incompatible",
            SolveStatus::Inconclusive => "inconclusive",
            SolveStatus::Stalled => "stalled",
        }
    }
}

/// Exact linear minimization over all representatives: the position of the
/// minimizing representative (smallest on ties) and the minimum.
pub fn lmo(prob: &ReducedProblem, w: &IntVec) -> (usize, BigInt) {
    let products = prob.inner_products(w);
    let mut best = 0;
    for (i, x) in products.iter().enumerate().skip(1) {
        if *x < products[best] {
            best = i;
        }
    }
    (best, products[best].clone())
}

/// `w_int,c = ⌊N · w_c · D^{k_max - k_c}⌋`: the per-block factor makes
/// `⟨w_int, V_int⟩` proportional to `⟨w, Φ⟩` despite the block scales.
pub fn round_direction(prob: &ReducedProblem, w: &[f64], scale_n: u64) -> IntVec {
    let d = BigInt::from(prob.target().denominator());
    let kmax = prob.space().max_k();
    let mut out = Vec::with_capacity(w.len());
    for block in prob.space().blocks() {
        let m = d.pow((kmax - block.k()) as u32) * scale_n;
        for &x in &w[block.offset..block.offset + block.len()] {
            out.push(floor_scaled(x, &m));
        }
    }
    IntVec::from_big(out)
}

pub fn solve(prob: &ReducedProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConstraint(format!("thread pool: {e}")))?;
            pool.install(|| solve_inner(prob, cfg))
        }
        None => solve_inner(prob, cfg),
    }
}

fn subproblem(active: &ActiveSet, cfg: &SolverConfig, warm: Option<&[f64]>) -> Result<SubproblemSolution> {
    match min_norm_point_with(active, cfg.qp_tol, warm, PIVOT_THRESHOLD) {
        Err(Error::Degenerate(msg)) => {
            debug!("subproblem degenerate ({msg}); cold re-solve with a tighter pivot");
            min_norm_point_with(active, cfg.qp_tol, None, PIVOT_THRESHOLD * 1e-2)
        }
        other => other,
    }
}

fn solve_inner(prob: &ReducedProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    let start = Instant::now();
    let cap = cfg.max_iterations.unwrap_or(4 * prob.n_cons() + 100);
    let mut active = ActiveSet::new(prob.n_cons());
    active.push(0, prob.float_vertex(0));
    let mut warm: Option<Vec<f64>> = None;
    let mut s_active = f64::NAN;
    for iteration in 1..=cap {
        let sol = match subproblem(&active, cfg, warm.as_deref()) {
            Ok(sol) => sol,
            Err(Error::Degenerate(msg)) => {
                warn!("giving up on a degenerate active set: {msg}");
                return Ok(outcome(SolveStatus::Stalled, iteration, &active, s_active));
            }
            Err(e) => return Err(e),
        };
        let (direction, gap) = match cfg.branch {
            Branch::Dual => (sol.w_star.clone(), sol.s_star),
            Branch::Primal => {
                let n = crate::qp::norm(&sol.x_star);
                (sol.x_star.clone(), if sol.s_star > 0.0 { n } else { 0.0 })
            }
        };
        s_active = gap;
        if gap <= cfg.zero_tol * active.max_norm() {
            info!("iteration {iteration}: |S| = {}, s_active = {gap:.3e}: inconclusive ({:.2?})", active.len(), start.elapsed());
            return Ok(outcome(SolveStatus::Inconclusive, iteration, &active, gap));
        }
        let w_int = round_direction(prob, &direction, cfg.scale_n);
        let (j, s_global) = lmo(prob, &w_int);
        info!(
            "iteration {iteration}: |S| = {}, s_active = {gap:.6e}, s_global {} ({:.2?})",
            active.len(),
            if s_global.is_positive() { "> 0" } else if s_global.is_zero() { "= 0" } else { "< 0" },
            start.elapsed()
        );
        if s_global.is_positive() {
            let verdict = check_vector(&w_int, prob);
            assert_eq!(verdict, Verdict::Valid, "LMO minimum positive but verification failed");
            let cert = Certificate::new(prob, &w_int, cfg.scale_n, iteration);
            return Ok(outcome(SolveStatus::Incompatible(Box::new(cert)), iteration, &active, gap));
        }
        if active.contains(j) {
            info!("LMO returned active vertex {j} with nonpositive gap: stalled");
            return Ok(outcome(SolveStatus::Stalled, iteration, &active, gap));
        }
        let mut lambda = sol.lambda;
        lambda.push(0.0);
        warm = Some(lambda);
        active.push(j, prob.float_vertex(j));
    }
    info!("iteration cap {cap} reached: stalled");
    Ok(outcome(SolveStatus::Stalled, cap, &active, s_active))
}

fn outcome(status: SolveStatus, iterations: usize, active: &ActiveSet, s_active: f64) -> SolveOutcome {
    SolveOutcome { status, iterations, active_size: active.len(), s_active }
}

#[derive(Debug, Clone)]
pub struct BisectOutcome {
    /// Smallest grid numerator with a certificate, if any.
    pub v_int: Option<u64>,
    pub grid: u64,
    pub certificate: Option<Certificate>,
    /// `(v_int, status label)` for every probe, in order.
    pub probes: Vec<(u64, &'static str)>,
}

/// Binary search for the smallest `v ∈ {0, ..., grid}` at which `solve`
/// certifies incompatibility, assuming certifiability is monotone in `v`.
pub fn bisect_visibility(
    family: Family,
    grid: u64,
    graph: &InflationGraph,
    specs: &[ConstraintSpec],
    cfg: &SolverConfig,
) -> Result<BisectOutcome> {
    if grid == 0 {
        return Err(Error::InvalidVisibility { num: 0, den: 0 });
    }
    let mut probes = Vec::new();
    let mut probe = |v: u64| -> Result<SolveOutcome> {
        let target = family.at(v, grid)?;
        let prob = ReducedProblem::build(graph.clone(), target, specs)?;
        let out = solve(&prob, cfg)?;
        info!("probe {v}/{grid}: {}", out.label());
        probes.push((v, out.label()));
        Ok(out)
    };
    let top = probe(grid)?;
    let Some(mut cert) = top.certificate().cloned() else {
        return Ok(BisectOutcome { v_int: None, grid, certificate: None, probes });
    };
    // invariant: hi certifies, lo does not (or lo = -1)
    let mut lo: i64 = -1;
    let mut hi = grid;
    while hi as i64 - lo > 1 {
        let mid = ((lo + hi as i64) / 2) as u64;
        let out = probe(mid)?;
        match out.certificate() {
            Some(c) => {
                hi = mid;
                cert = c.clone();
            }
            None => lo = mid as i64,
        }
    }
    Ok(BisectOutcome { v_int: Some(hi), grid, certificate: Some(cert), probes })
}
