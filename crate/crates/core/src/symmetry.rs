//! Source, party and outcome symmetries of inflation graphs, the groups they
//! form, and orbit enumeration over event families.
//!
//! An inflation symmetry `g = (σ, π, τ)` acts on parties by `g(P) = σ(π(P))`
//! and on events by `g(e) = τ ∘ e ∘ π⁻¹ ∘ σ⁻¹`, i.e. the outcome that `e`
//! assigns to `P` is relabelled by `τ` and moved to party `g(P)`.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Event, EventCodec, InflationGraph, InflationSize, Party, PartyType};
use crate::perm::Perm;
use crate::target::RationalDistribution;

/// One permutation of copy indices per source `(α, β, γ)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourcePermutation {
    pub perms: [Perm; 3],
}

impl SourcePermutation {
    pub fn identity(size: &InflationSize) -> Self {
        SourcePermutation { perms: [0, 1, 2].map(|s| Perm::identity(size.copies(s))) }
    }

    pub fn all(size: &InflationSize) -> Vec<Self> {
        let mut out = Vec::new();
        for a in Perm::all(size.copies(0)) {
            for b in Perm::all(size.copies(1)) {
                for c in Perm::all(size.copies(2)) {
                    out.push(SourcePermutation { perms: [a, b, c] });
                }
            }
        }
        out
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        let mut perms = self.perms;
        for (p, q) in perms.iter_mut().zip(&other.perms) {
            if p.len() != q.len() {
                return Err(Error::InadmissibleSymmetry("source permutation degrees differ".into()));
            }
            *p = p.compose(q);
        }
        Ok(SourcePermutation { perms })
    }

    pub fn inverse(&self) -> Self {
        SourcePermutation { perms: self.perms.map(|p| p.inverse()) }
    }

    /// `π[σ] = (σ_{π⁻¹(0)}, σ_{π⁻¹(1)}, σ_{π⁻¹(2)})`.
    pub fn shuffled_by(&self, pi: &Perm) -> Self {
        let inv = pi.inverse();
        SourcePermutation { perms: [0, 1, 2].map(|s| self.perms[inv.apply(s)]) }
    }

    /// `σ(P^t_{jk}) = P^t_{σ_{t+1}(j) σ_{t+2}(k)}`.
    pub fn apply_to_party(&self, party: &Party) -> Party {
        let (sj, sk) = party.kind.parent_sources();
        Party::new(party.kind, self.perms[sj].apply(party.j), self.perms[sk].apply(party.k))
    }

    pub fn is_identity(&self) -> bool {
        self.perms.iter().all(Perm::is_identity)
    }
}

impl fmt::Debug for SourcePermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?}, {:?})", self.perms[0].images(), self.perms[1].images(), self.perms[2].images())
    }
}

/// `π(P^t_{jk})` is `P^{π(t)}_{jk}` for even `π` and `P^{π(t)}_{kj}` for odd
/// `π`.
pub fn party_perm_apply(pi: &Perm, party: &Party) -> Party {
    let kind = PartyType::from_index(pi.apply(party.kind.index()));
    if pi.sign() > 0 {
        Party::new(kind, party.j, party.k)
    } else {
        Party::new(kind, party.k, party.j)
    }
}

/// The party permutations whose action on parties is well typed for `size`,
/// found by checking every party of the graph.
pub fn admissible_party_group(size: &InflationSize) -> Vec<Perm> {
    let graph = InflationGraph::new(*size);
    Perm::all(3)
        .into_iter()
        .filter(|pi| graph.parties().iter().all(|p| party_perm_apply(pi, p).fits(size)))
        .collect()
}

/// An element `(σ, π, τ)` of the full inflation symmetry group.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InflationSymmetry {
    pub source: SourcePermutation,
    pub party: Perm,
    pub outcome: Perm,
}

impl fmt::Debug for InflationSymmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(σ={:?}, π={:?}, τ={:?})", self.source, self.party.images(), self.outcome.images())
    }
}

impl InflationSymmetry {
    pub fn identity(size: &InflationSize, nouts: usize) -> Self {
        InflationSymmetry {
            source: SourcePermutation::identity(size),
            party: Perm::identity(3),
            outcome: Perm::identity(nouts),
        }
    }

    /// `(σ, π, τ)·(σ', π', τ') = (σ ∘ π[σ'], π ∘ π', τ ∘ τ')`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        Ok(InflationSymmetry {
            source: self.source.compose(&other.source.shuffled_by(&self.party))?,
            party: self.party.compose(&other.party),
            outcome: self.outcome.compose(&other.outcome),
        })
    }

    /// `(π⁻¹[σ⁻¹], π⁻¹, τ⁻¹)`.
    pub fn inverse(&self) -> Self {
        let pinv = self.party.inverse();
        InflationSymmetry {
            source: self.source.inverse().shuffled_by(&pinv),
            party: pinv,
            outcome: self.outcome.inverse(),
        }
    }

    pub fn apply_to_party(&self, size: &InflationSize, party: &Party) -> Result<Party> {
        if !party.fits(size) {
            return Err(Error::UnknownParty(party.to_string()));
        }
        let moved = party_perm_apply(&self.party, party);
        if !moved.fits(size) {
            return Err(Error::InadmissibleSymmetry(format!(
                "party permutation {:?} maps {party} outside the {size} graph",
                self.party.images()
            )));
        }
        let image = self.source.apply_to_party(&moved);
        if !image.fits(size) {
            return Err(Error::InadmissibleSymmetry(format!("source permutation does not fit the {size} graph")));
        }
        Ok(image)
    }

    /// Moves the outcome of each party `P` to `g(P)` relabelled by `τ`. The
    /// scope must be mapped onto itself.
    pub fn apply_to_event(&self, size: &InflationSize, event: &Event) -> Result<Event> {
        if self.outcome.len() != event.nouts() {
            return Err(Error::InadmissibleSymmetry("outcome permutation degree differs from nouts".into()));
        }
        let mut pairs = Vec::with_capacity(event.scope().len());
        for (p, &o) in event.scope().iter().zip(event.outcomes()) {
            pairs.push((self.apply_to_party(size, p)?, self.outcome.apply(o as usize) as u8));
        }
        let image = Event::new(pairs, event.nouts())?;
        if image.scope() != event.scope() {
            return Err(Error::NotClosed("symmetry does not map the event's scope onto itself".into()));
        }
        Ok(image)
    }

    /// Image of a party set, sorted.
    pub fn apply_to_set(&self, size: &InflationSize, parties: &[Party]) -> Result<Vec<Party>> {
        let mut out = parties.iter().map(|p| self.apply_to_party(size, p)).collect::<Result<Vec<_>>>()?;
        out.sort();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    /// Symmetries of the target distribution, `G_p`.
    Distribution,
    /// Stabilizer of a constraint inside `G_p`, `H_c`.
    Constraint,
    Other,
}

/// An explicitly listed finite group of inflation symmetries together with
/// its precomputed action on the parties of one graph.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    kind: GroupKind,
    size: InflationSize,
    nouts: usize,
    elements: Vec<InflationSymmetry>,
    party_maps: Vec<Vec<u16>>,
}

impl SymmetryGroup {
    /// Checks that `elements` is closed under composition and inverses and
    /// contains the identity, then tabulates the action.
    pub fn new(graph: &InflationGraph, nouts: usize, elements: Vec<InflationSymmetry>, kind: GroupKind) -> Result<Self> {
        let group = Self::new_unchecked(graph, nouts, elements, kind)?;
        group.check_closure()?;
        Ok(group)
    }

    fn new_unchecked(
        graph: &InflationGraph,
        nouts: usize,
        elements: Vec<InflationSymmetry>,
        kind: GroupKind,
    ) -> Result<Self> {
        let size = graph.size();
        if elements.is_empty() {
            return Err(Error::InvalidGroup("empty element list".into()));
        }
        let mut party_maps = Vec::with_capacity(elements.len());
        for g in &elements {
            if g.outcome.len() != nouts {
                return Err(Error::InvalidGroup("outcome permutation degree differs from nouts".into()));
            }
            let map = graph
                .parties()
                .iter()
                .map(|p| {
                    let image = g.apply_to_party(&size, p)?;
                    Ok(graph.require_index(&image)? as u16)
                })
                .collect::<Result<Vec<u16>>>()?;
            party_maps.push(map);
        }
        Ok(SymmetryGroup { kind, size, nouts, elements, party_maps })
    }

    fn check_closure(&self) -> Result<()> {
        let set: HashSet<&InflationSymmetry> = self.elements.iter().collect();
        if set.len() != self.elements.len() {
            return Err(Error::InvalidGroup("duplicate elements".into()));
        }
        if !set.contains(&InflationSymmetry::identity(&self.size, self.nouts)) {
            return Err(Error::InvalidGroup("identity missing".into()));
        }
        let not_closed = self.elements.par_iter().any(|g| {
            !set.contains(&g.inverse())
                || self.elements.iter().any(|h| match g.compose(h) {
                    Ok(gh) => !set.contains(&gh),
                    Err(_) => true,
                })
        });
        if not_closed {
            return Err(Error::InvalidGroup("not closed under composition and inverse".into()));
        }
        Ok(())
    }

    pub fn trivial(graph: &InflationGraph, nouts: usize) -> Self {
        Self::new_unchecked(graph, nouts, vec![InflationSymmetry::identity(&graph.size(), nouts)], GroupKind::Other)
            .expect("identity acts on every graph")
    }

    /// Source permutations only.
    pub fn sources(graph: &InflationGraph, nouts: usize) -> Self {
        let size = graph.size();
        let elements = SourcePermutation::all(&size)
            .into_iter()
            .map(|source| InflationSymmetry { source, party: Perm::identity(3), outcome: Perm::identity(nouts) })
            .collect();
        Self::new_unchecked(graph, nouts, elements, GroupKind::Other).expect("source permutations act on the graph")
    }

    /// `G_p`: every source permutation combined with every admissible
    /// `(π, τ)` pair that leaves `p` invariant.
    pub fn distribution_group(graph: &InflationGraph, p: &RationalDistribution) -> Result<Self> {
        let size = graph.size();
        let nouts = p.nouts();
        let sources = SourcePermutation::all(&size);
        let mut elements = Vec::new();
        for pi in admissible_party_group(&size) {
            for tau in Perm::all(nouts) {
                if !p.is_invariant_under(&pi, &tau) {
                    continue;
                }
                for source in &sources {
                    elements.push(InflationSymmetry { source: *source, party: pi, outcome: tau });
                }
            }
        }
        Self::new(graph, nouts, elements, GroupKind::Distribution)
    }

    /// The subgroup of elements satisfying `keep`; closure is re-checked.
    pub fn filter(&self, graph: &InflationGraph, kind: GroupKind, keep: impl Fn(&InflationSymmetry) -> bool) -> Result<Self> {
        let elements = self.elements.iter().filter(|g| keep(g)).copied().collect();
        Self::new(graph, self.nouts, elements, kind)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn size(&self) -> InflationSize {
        self.size
    }

    pub fn nouts(&self) -> usize {
        self.nouts
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[InflationSymmetry] {
        &self.elements
    }

    /// Graph party index `i` is mapped to `party_map(g)[i]` by element `g`.
    pub fn party_map(&self, g: usize) -> &[u16] {
        &self.party_maps[g]
    }

    /// Number of distinct `(π, τ)` parts.
    pub fn party_outcome_pairs(&self) -> usize {
        self.elements.iter().map(|g| (g.party, g.outcome)).collect::<HashSet<_>>().len()
    }

    /// The action of every element restricted to the parties `scope`
    /// (graph indices), which every element must map onto itself.
    pub fn scoped_action(&self, scope: &[usize]) -> Result<ScopedAction> {
        let mut position = vec![u8::MAX; self.party_maps.first().map_or(0, Vec::len)];
        for (pos, &p) in scope.iter().enumerate() {
            position[p] = pos as u8;
        }
        let mut pulls = Vec::with_capacity(self.order());
        for (g, map) in self.party_maps.iter().enumerate() {
            let mut pull = vec![0u8; scope.len()];
            for (pos, &p) in scope.iter().enumerate() {
                let image = map[p] as usize;
                let target = position[image];
                if target == u8::MAX {
                    return Err(Error::NotClosed(format!("element {:?} moves a party out of the scope", self.elements[g])));
                }
                // image digit at `target` comes from source digit at `pos`
                pull[target as usize] = pos as u8;
            }
            pulls.push(pull);
        }
        let outcomes = self.elements.iter().map(|g| g.outcome).collect();
        Ok(ScopedAction { codec: EventCodec::new(self.nouts, scope.len())?, pulls, outcomes })
    }
}

/// A group action on the events over a fixed scope, in digit form.
#[derive(Debug, Clone)]
pub struct ScopedAction {
    codec: EventCodec,
    pulls: Vec<Vec<u8>>,
    outcomes: Vec<Perm>,
}

impl ScopedAction {
    pub fn codec(&self) -> EventCodec {
        self.codec
    }

    pub fn order(&self) -> usize {
        self.pulls.len()
    }

    /// Writes the digits of `g(e)` into `out`.
    #[inline]
    pub fn apply_digits(&self, g: usize, digits: &[u8], out: &mut [u8]) {
        let pull = &self.pulls[g];
        let tau = &self.outcomes[g];
        for (o, &src) in out.iter_mut().zip(pull) {
            *o = tau.apply(digits[src as usize] as usize) as u8;
        }
    }

    pub fn apply_index(&self, g: usize, index: u64, scratch: &mut [u8], out: &mut [u8]) -> u64 {
        self.codec.decode_into(index, scratch);
        self.apply_digits(g, scratch, out);
        self.codec.encode(out)
    }

    /// Minimal index over the orbit of `index` and the stabilizer order.
    pub fn canonical(&self, index: u64) -> (u64, usize) {
        let len = self.codec.len();
        let mut digits = vec![0u8; len];
        let mut image = vec![0u8; len];
        self.codec.decode_into(index, &mut digits);
        let mut min = index;
        let mut stab = 0;
        for g in 0..self.order() {
            self.apply_digits(g, &digits, &mut image);
            let idx = self.codec.encode(&image);
            min = min.min(idx);
            stab += usize::from(idx == index);
        }
        (min, stab)
    }
}

/// How to enumerate orbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitStrategy {
    /// Bitmap marking when the family fits the memory budget, otherwise a
    /// streaming canonical-representative scan.
    Auto,
    Bitmap,
    Streaming,
}

/// Events of a scope partitioned into orbits. Representatives are the
/// minimal canonical indices, listed in increasing order.
#[derive(Debug, Clone)]
pub struct Orbits {
    codec: EventCodec,
    reps: Vec<u64>,
    sizes: Vec<u64>,
    labels: Option<Vec<u32>>,
}

/// Events per bitmap-enumerated family before switching to streaming.
pub const BITMAP_BUDGET: u64 = 1 << 33;

impl Orbits {
    /// Enumerates orbits of `action`. With `label`, also records the orbit
    /// number of every event (needed for marginal lookups).
    pub fn enumerate(action: &ScopedAction, strategy: OrbitStrategy, label: bool) -> Result<Self> {
        let codec = action.codec();
        let use_bitmap = match strategy {
            OrbitStrategy::Bitmap => true,
            OrbitStrategy::Streaming => false,
            OrbitStrategy::Auto => codec.count() <= BITMAP_BUDGET,
        };
        if label && codec.count() > u32::MAX as u64 {
            return Err(Error::TooLarge(codec.count()));
        }
        if use_bitmap {
            Ok(Self::by_marking(action, label))
        } else {
            let mut orbits = Self::by_streaming(action);
            if label {
                let mut labels = vec![0u32; codec.count() as usize];
                labels.par_iter_mut().enumerate().for_each(|(i, l)| {
                    let (rep, _) = action.canonical(i as u64);
                    *l = orbits.reps.binary_search(&rep).expect("canonical index is a representative") as u32;
                });
                orbits.labels = Some(labels);
            }
            Ok(orbits)
        }
    }

    fn by_marking(action: &ScopedAction, label: bool) -> Self {
        let codec = action.codec();
        let n = codec.count();
        let len = codec.len();
        let mut seen = vec![0u64; n.div_ceil(64) as usize];
        let mut labels = if label { Some(vec![u32::MAX; n as usize]) } else { None };
        let mut reps = Vec::new();
        let mut sizes = Vec::new();
        let mut digits = vec![0u8; len];
        let mut image = vec![0u8; len];
        for idx in 0..n {
            if seen[(idx / 64) as usize] >> (idx % 64) & 1 == 1 {
                continue;
            }
            let orbit = reps.len() as u32;
            codec.decode_into(idx, &mut digits);
            let mut count = 0;
            for g in 0..action.order() {
                action.apply_digits(g, &digits, &mut image);
                let j = codec.encode(&image);
                let word = &mut seen[(j / 64) as usize];
                if *word >> (j % 64) & 1 == 0 {
                    *word |= 1 << (j % 64);
                    count += 1;
                    if let Some(l) = labels.as_mut() {
                        l[j as usize] = orbit;
                    }
                }
            }
            reps.push(idx);
            sizes.push(count);
        }
        Orbits { codec, reps, sizes, labels }
    }

    fn by_streaming(action: &ScopedAction) -> Self {
        const CHUNK: u64 = 1 << 16;
        let codec = action.codec();
        let n = codec.count();
        let order = action.order() as u64;
        let chunks: Vec<(Vec<u64>, Vec<u64>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut reps = Vec::new();
                let mut sizes = Vec::new();
                for idx in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let (min, stab) = action.canonical(idx);
                    if min == idx {
                        reps.push(idx);
                        sizes.push(order / stab as u64);
                    }
                }
                (reps, sizes)
            })
            .collect();
        let mut reps = Vec::new();
        let mut sizes = Vec::new();
        for (r, s) in chunks {
            reps.extend(r);
            sizes.extend(s);
        }
        Orbits { codec, reps, sizes, labels: None }
    }

    pub fn codec(&self) -> EventCodec {
        self.codec
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn representatives(&self) -> &[u64] {
        &self.reps
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// Orbit number of an event index; only available when labelled.
    #[inline]
    pub fn label(&self, index: u64) -> Option<u32> {
        self.labels.as_ref().map(|l| l[index as usize])
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }
}

/// Orbit representatives of the events over `scope` (graph party indices,
/// sorted ascending) under `group`.
pub fn enumerate_orbit_representatives(group: &SymmetryGroup, scope: &[usize], strategy: OrbitStrategy) -> Result<Orbits> {
    let action = group.scoped_action(scope)?;
    Orbits::enumerate(&action, strategy, false)
}
