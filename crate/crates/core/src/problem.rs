//! The symmetrized inflation problem as a vertex oracle: every orbit
//! representative `e` of deterministic inflation events yields the exact
//! integer vector `|G_p| D^{k_c} Φ_c(δ_e)` per constraint block `c`.

use std::time::Instant;

use log::{debug, info};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::constraints::{expand_constraint_orbits, ConstraintBlock, ConstraintSpec, ReducedConstraintSpace};
use crate::error::{Error, Result};
use crate::events::{Event, EventCodec, InflationGraph};
use crate::exact::{ratio_to_f64, IntVec};
use crate::perm::Perm;
use crate::symmetry::{OrbitStrategy, Orbits, SymmetryGroup};
use crate::target::RationalDistribution;

/// Largest full event space that will be enumerated.
pub const MAX_EVENT_SPACE: u64 = 1 << 32;

/// Vertices are cached when `n_vars · n_cons` stays below this.
pub const DEFAULT_CACHE_BUDGET: usize = 1 << 26;

/// Target, symmetry group and reduced constraint space; everything needed
/// to report sizes without touching the full event space.
#[derive(Debug, Clone)]
pub struct ProblemSetup {
    pub graph: InflationGraph,
    pub target: RationalDistribution,
    pub group: SymmetryGroup,
    pub space: ReducedConstraintSpace,
}

impl ProblemSetup {
    pub fn new(graph: InflationGraph, target: RationalDistribution, specs: &[ConstraintSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidConstraint("empty constraint set".into()));
        }
        let start = Instant::now();
        let group = SymmetryGroup::distribution_group(&graph, &target)?;
        let orbits = expand_constraint_orbits(specs, &graph, &group)?;
        let space = ReducedConstraintSpace::build(&graph, orbits)?;
        info!(
            "size {}: |G_p| = {}, {} constraint orbit(s), n_cons = {} ({:.2?})",
            graph.size(),
            group.order(),
            space.blocks().len(),
            space.n_cons(),
            start.elapsed()
        );
        Ok(ProblemSetup { graph, target, group, space })
    }

    pub fn n_cons(&self) -> usize {
        self.space.n_cons()
    }

    /// `nouts^|parties|`, if it fits in 64 bits.
    pub fn unreduced_vars(&self) -> Option<u64> {
        EventCodec::new(self.target.nouts(), self.graph.party_count()).ok().map(|c| c.count())
    }
}

/// Per-block data for streaming vertex generation.
#[derive(Debug, Clone)]
struct BlockKernel {
    /// `pulls[g][i]` is the graph party whose outcome (relabelled by `τ_g`)
    /// lands on scope position `i` in `g(e)`.
    pulls: Vec<Vec<u16>>,
    scope_codec: EventCodec,
    residual_codec: EventCodec,
    /// `D^{k_c}`, the weight of the inflation-marginal term.
    unit: BigInt,
    /// For every residual outcome string `r`: the orbits `o` and weights
    /// `Σ_{μ ∈ o, μ_R = r} Π_i P_{T_i}(μ_{T_i})` of the target term.
    tables: Vec<Vec<(u32, BigInt)>>,
    small_tables: Option<Vec<Vec<(u32, i128)>>>,
    /// `|G_p| · D^{k_c}`.
    scale: BigInt,
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    setup: ProblemSetup,
    events: Orbits,
    event_codec: EventCodec,
    outcomes: Vec<Perm>,
    kernels: Vec<BlockKernel>,
    cache: Option<VertexCache>,
}

#[derive(Debug, Clone)]
struct VertexCache {
    exact: Vec<IntVec>,
    float: Vec<Vec<f64>>,
}

impl ReducedProblem {
    pub fn build(graph: InflationGraph, target: RationalDistribution, specs: &[ConstraintSpec]) -> Result<Self> {
        Self::from_setup(ProblemSetup::new(graph, target, specs)?, DEFAULT_CACHE_BUDGET)
    }

    /// Enumerates event representatives and prepares vertex generation.
    /// Vertices are precomputed when `n_vars · n_cons <= cache_budget`.
    pub fn from_setup(setup: ProblemSetup, cache_budget: usize) -> Result<Self> {
        let start = Instant::now();
        let nouts = setup.target.nouts();
        let event_codec = EventCodec::new(nouts, setup.graph.party_count())?;
        if event_codec.count() > MAX_EVENT_SPACE {
            return Err(Error::TooLarge(event_codec.count()));
        }
        let all: Vec<usize> = (0..setup.graph.party_count()).collect();
        let action = setup.group.scoped_action(&all)?;
        let events = Orbits::enumerate(&action, OrbitStrategy::Auto, false)?;
        info!("n_vars = {} event orbits of {} ({:.2?})", events.len(), event_codec.count(), start.elapsed());

        let order = setup.group.order();
        let inverses: Vec<Vec<u16>> = (0..order)
            .map(|g| {
                let map = setup.group.party_map(g);
                let mut inv = vec![0u16; map.len()];
                for (p, &q) in map.iter().enumerate() {
                    inv[q as usize] = p as u16;
                }
                inv
            })
            .collect();
        let d = BigInt::from(setup.target.denominator());
        let kernels = setup
            .space
            .blocks()
            .iter()
            .map(|block| build_kernel(block, &setup.target, &inverses, &d, order))
            .collect::<Result<Vec<_>>>()?;
        let outcomes = setup.group.elements().iter().map(|g| g.outcome).collect();
        let mut problem = ReducedProblem { setup, events, event_codec, outcomes, kernels, cache: None };
        if problem.n_vars().saturating_mul(problem.n_cons()) <= cache_budget {
            let t = Instant::now();
            let exact: Vec<IntVec> = (0..problem.n_vars()).into_par_iter().map(|i| problem.compute_vertex(i)).collect();
            let float = exact.iter().map(|v| problem.to_float(v)).collect();
            problem.cache = Some(VertexCache { exact, float });
            debug!("cached {} vertices ({:.2?})", problem.n_vars(), t.elapsed());
        }
        Ok(problem)
    }

    pub fn setup(&self) -> &ProblemSetup {
        &self.setup
    }

    pub fn graph(&self) -> &InflationGraph {
        &self.setup.graph
    }

    pub fn target(&self) -> &RationalDistribution {
        &self.setup.target
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.setup.group
    }

    pub fn space(&self) -> &ReducedConstraintSpace {
        &self.setup.space
    }

    pub fn n_vars(&self) -> usize {
        self.events.len()
    }

    pub fn n_cons(&self) -> usize {
        self.setup.space.n_cons()
    }

    /// Orbit representatives as full-event indices, increasing.
    pub fn representatives(&self) -> &[u64] {
        self.events.representatives()
    }

    pub fn orbit_sizes(&self) -> &[u64] {
        self.events.sizes()
    }

    pub fn representative_event(&self, i: usize) -> Event {
        Event::decode(self.graph().parties(), self.events.representatives()[i], self.target().nouts())
            .expect("representative index is in range")
    }

    /// `|G_p| · D^{k_c}` for each block.
    pub fn block_scales(&self) -> Vec<BigInt> {
        self.kernels.iter().map(|k| k.scale.clone()).collect()
    }

    /// Exact vertex of the `i`-th representative.
    pub fn exact_vertex(&self, i: usize) -> IntVec {
        match &self.cache {
            Some(c) => c.exact[i].clone(),
            None => self.compute_vertex(i),
        }
    }

    /// Exact vertex of the `i`-th representative divided per block by its
    /// scale.
    pub fn float_vertex(&self, i: usize) -> Vec<f64> {
        match &self.cache {
            Some(c) => c.float[i].clone(),
            None => self.to_float(&self.compute_vertex(i)),
        }
    }

    /// `⟨w, V(e_i)⟩` for every representative, in order.
    pub fn inner_products(&self, w: &IntVec) -> Vec<BigInt> {
        assert_eq!(w.len(), self.n_cons(), "dimension mismatch");
        match &self.cache {
            Some(c) => c.exact.par_iter().map(|v| v.dot(w)).collect(),
            None => (0..self.n_vars()).into_par_iter().map(|i| self.compute_vertex(i).dot(w)).collect(),
        }
    }

    fn compute_vertex(&self, i: usize) -> IntVec {
        self.vertex_of_index(self.events.representatives()[i])
    }

    /// Exact vertex `|G_p| D^{k_c} Φ_c(δ_e)` for any full event index; equal
    /// across an orbit.
    pub fn vertex_of_index(&self, index: u64) -> IntVec {
        let digits = self.event_codec.decode(index);
        let mut small: Vec<i128> = Vec::with_capacity(self.n_cons());
        let mut big: Option<Vec<BigInt>> = None;
        for (kernel, block) in self.kernels.iter().zip(self.setup.space.blocks()) {
            let (q_counts, r_counts) = self.histograms(kernel, block, &digits);
            match (&kernel.small_tables, &mut big) {
                (Some(tables), None) => match combine_small(kernel, tables, &q_counts, &r_counts) {
                    Some(v) => small.extend(v),
                    None => {
                        let mut b: Vec<BigInt> = small.iter().map(|&x| BigInt::from(x)).collect();
                        b.extend(combine_big(kernel, &q_counts, &r_counts));
                        big = Some(b);
                    }
                },
                (_, Some(b)) => b.extend(combine_big(kernel, &q_counts, &r_counts)),
                (None, None) => {
                    let mut b: Vec<BigInt> = small.iter().map(|&x| BigInt::from(x)).collect();
                    b.extend(combine_big(kernel, &q_counts, &r_counts));
                    big = Some(b);
                }
            }
        }
        match big {
            Some(b) => IntVec::from_big(b),
            None => IntVec::Small(small),
        }
    }

    /// Counts over `g ∈ G_p` of the marginal orbit of `g(e)|_S` and of the
    /// residual string `g(e)|_R`.
    fn histograms(&self, kernel: &BlockKernel, block: &ConstraintBlock, digits: &[u8]) -> (Vec<u64>, Vec<u64>) {
        let mut q_counts = vec![0u64; block.len()];
        let mut r_counts = vec![0u64; kernel.residual_codec.count() as usize];
        let mut mu = vec![0u8; block.scope.len()];
        let mut r = vec![0u8; block.residual_positions.len()];
        for (g, pull) in kernel.pulls.iter().enumerate() {
            let tau = &self.outcomes[g];
            for (m, &src) in mu.iter_mut().zip(pull) {
                *m = tau.apply(digits[src as usize] as usize) as u8;
            }
            let label = block.marginal_orbits.label(kernel.scope_codec.encode(&mu)).expect("labelled orbits");
            q_counts[label as usize] += 1;
            for (x, &pos) in r.iter_mut().zip(&block.residual_positions) {
                *x = mu[pos];
            }
            r_counts[kernel.residual_codec.encode(&r) as usize] += 1;
        }
        (q_counts, r_counts)
    }

    /// Divides each block by its scale.
    pub fn to_float(&self, v: &IntVec) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        for (kernel, block) in self.kernels.iter().zip(self.setup.space.blocks()) {
            let range = block.offset..block.offset + block.len();
            match v {
                IntVec::Small(x) => {
                    let s = kernel.scale.to_f64().unwrap_or(f64::INFINITY);
                    let exact_scale = kernel.scale.to_i64().is_some_and(|s| s < 1 << 53);
                    for &c in &x[range] {
                        if exact_scale && c.unsigned_abs() < 1 << 53 {
                            out.push(c as f64 / s);
                        } else {
                            out.push(ratio_to_f64(&BigInt::from(c), &kernel.scale));
                        }
                    }
                }
                IntVec::Big(x) => out.extend(x[range].iter().map(|c| ratio_to_f64(c, &kernel.scale))),
            }
        }
        out
    }
}

fn combine_small(kernel: &BlockKernel, tables: &[Vec<(u32, i128)>], q: &[u64], r: &[u64]) -> Option<Vec<i128>> {
    let unit = kernel.unit.to_i128()?;
    let mut out: Vec<i128> = q.iter().map(|&c| (c as i128).checked_mul(unit)).collect::<Option<_>>()?;
    for (count, table) in r.iter().zip(tables) {
        if *count == 0 {
            continue;
        }
        for &(o, w) in table {
            let x = &mut out[o as usize];
            *x = x.checked_sub(w.checked_mul(*count as i128)?)?;
        }
    }
    Some(out)
}

fn combine_big(kernel: &BlockKernel, q: &[u64], r: &[u64]) -> Vec<BigInt> {
    let mut out: Vec<BigInt> = q.iter().map(|&c| &kernel.unit * c).collect();
    for (count, table) in r.iter().zip(&kernel.tables) {
        if *count == 0 {
            continue;
        }
        for (o, w) in table {
            out[*o as usize] -= w * *count;
        }
    }
    out
}

fn build_kernel(
    block: &ConstraintBlock,
    target: &RationalDistribution,
    inverses: &[Vec<u16>],
    d: &BigInt,
    order: usize,
) -> Result<BlockKernel> {
    let nouts = target.nouts();
    let pulls = inverses
        .iter()
        .map(|inv| block.scope.iter().map(|&p| inv[p]).collect())
        .collect();
    let scope_codec = block.marginal_orbits.codec();
    let residual_codec = EventCodec::new(nouts, block.residual_positions.len())?;
    let marginals = block
        .target_types
        .iter()
        .map(|types| target.marginal_numerators(types))
        .collect::<Result<Vec<_>>>()?;
    let target_len: usize = block.target_positions.iter().map(Vec::len).sum();
    let target_codec = EventCodec::new(nouts, target_len)?;
    let tcodecs = block
        .target_positions
        .iter()
        .map(|t| EventCodec::new(nouts, t.len()))
        .collect::<Result<Vec<_>>>()?;

    // weights of each target completion, independent of the residual
    let mut completions: Vec<(Vec<u8>, BigInt)> = Vec::new();
    let mut digits = vec![0u8; target_len];
    for idx in 0..target_codec.count() {
        target_codec.decode_into(idx, &mut digits);
        let mut weight = BigInt::one();
        let mut at = 0;
        for (marginal, codec) in marginals.iter().zip(&tcodecs) {
            let part = &digits[at..at + codec.len()];
            weight *= marginal[codec.encode(part) as usize];
            at += codec.len();
        }
        if !weight.is_zero() {
            completions.push((digits.clone(), weight));
        }
    }

    let mut tables = Vec::with_capacity(residual_codec.count() as usize);
    let mut mu = vec![0u8; block.scope.len()];
    let mut rdigits = vec![0u8; block.residual_positions.len()];
    let flat_targets: Vec<usize> = block.target_positions.iter().flatten().copied().collect();
    for r in 0..residual_codec.count() {
        residual_codec.decode_into(r, &mut rdigits);
        for (&pos, &x) in block.residual_positions.iter().zip(&rdigits) {
            mu[pos] = x;
        }
        let mut acc: Vec<(u32, BigInt)> = Vec::new();
        for (tdigits, weight) in &completions {
            for (&pos, &x) in flat_targets.iter().zip(tdigits) {
                mu[pos] = x;
            }
            let label = block.marginal_orbits.label(scope_codec.encode(&mu)).expect("labelled orbits");
            acc.push((label, weight.clone()));
        }
        acc.sort_by_key(|(o, _)| *o);
        let mut merged: Vec<(u32, BigInt)> = Vec::new();
        for (o, w) in acc {
            match merged.last_mut() {
                Some((lo, lw)) if *lo == o => *lw += w,
                _ => merged.push((o, w)),
            }
        }
        tables.push(merged);
    }
    let small_tables = tables
        .iter()
        .map(|t| t.iter().map(|(o, w)| w.to_i128().map(|w| (*o, w))).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>();
    let unit = d.pow(block.k() as u32);
    let scale = &unit * order;
    Ok(BlockKernel { pulls, scope_codec, residual_codec, unit, tables, small_tables, scale })
}
