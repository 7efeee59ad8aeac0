//! Inflation graphs of the triangle network, their parties, and events.
//!
//! Sources are indexed `0 = α`, `1 = β`, `2 = γ`. A party of type `t` is fed
//! by copy `j` of source `t + 1` and copy `k` of source `t + 2` (mod 3), so
//! `A_{jk}` sits under `(β_j, γ_k)`, `B_{jk}` under `(γ_j, α_k)` and `C_{jk}`
//! under `(α_j, β_k)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported number of copies per source and of outcomes per party.
pub const MAX_DEGREE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartyType {
    A = 0,
    B = 1,
    C = 2,
}

impl PartyType {
    pub const ALL: [PartyType; 3] = [PartyType::A, PartyType::B, PartyType::C];

    pub fn from_index(t: usize) -> PartyType {
        Self::ALL[t % 3]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        ['A', 'B', 'C'][self.index()]
    }

    /// Sources feeding this party type, in `(j, k)` order.
    pub fn parent_sources(self) -> (usize, usize) {
        let t = self.index();
        ((t + 1) % 3, (t + 2) % 3)
    }
}

/// Number of copies of the α, β and γ sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InflationSize {
    z: [usize; 3],
}

impl InflationSize {
    pub fn new(alpha: usize, beta: usize, gamma: usize) -> Result<Self> {
        let z = [alpha, beta, gamma];
        if z.iter().any(|&c| c == 0 || c > MAX_DEGREE) {
            return Err(Error::InvalidSize(format!(
                "source copy counts must lie in 1..={MAX_DEGREE}, got {alpha},{beta},{gamma}"
            )));
        }
        Ok(InflationSize { z })
    }

    pub fn copies(&self, source: usize) -> usize {
        self.z[source]
    }

    pub fn as_array(&self) -> [usize; 3] {
        self.z
    }

    /// `z_β z_γ + z_γ z_α + z_α z_β`.
    pub fn party_count(&self) -> usize {
        PartyType::ALL.iter().map(|&t| self.type_count(t)).sum()
    }

    pub fn type_count(&self, t: PartyType) -> usize {
        let (sj, sk) = t.parent_sources();
        self.z[sj] * self.z[sk]
    }
}

impl fmt::Display for InflationSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.z[0], self.z[1], self.z[2])
    }
}

impl FromStr for InflationSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidSize(format!("expected a,b,c but got {s:?}")));
        }
        let mut z = [0usize; 3];
        for (slot, p) in z.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidSize(format!("not a positive integer: {p:?}")))?;
        }
        InflationSize::new(z[0], z[1], z[2])
    }
}

/// An inflation party `P^t_{jk}`. The derived ordering is the canonical
/// `(type, j, k)` order used everywhere for indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Party {
    pub kind: PartyType,
    pub j: usize,
    pub k: usize,
}

impl Party {
    pub fn new(kind: PartyType, j: usize, k: usize) -> Self {
        Party { kind, j, k }
    }

    /// The two `(source, copy)` pairs feeding this party.
    pub fn parents(&self) -> [(usize, usize); 2] {
        let (sj, sk) = self.kind.parent_sources();
        [(sj, self.j), (sk, self.k)]
    }

    pub fn fits(&self, size: &InflationSize) -> bool {
        let (sj, sk) = self.kind.parent_sources();
        self.j < size.copies(sj) && self.k < size.copies(sk)
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.j < 10 && self.k < 10 {
            write!(f, "{}{}{}", self.kind.letter(), self.j, self.k)
        } else {
            write!(f, "{}{}_{}", self.kind.letter(), self.j, self.k)
        }
    }
}

impl FromStr for Party {
    type Err = Error;

    /// Accepts `A01` (single-digit indices) or `A1_12`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownParty(s.to_string());
        let s = s.trim();
        let mut chars = s.chars();
        let kind = match chars.next().ok_or_else(bad)?.to_ascii_uppercase() {
            'A' => PartyType::A,
            'B' => PartyType::B,
            'C' => PartyType::C,
            _ => return Err(bad()),
        };
        let rest = chars.as_str();
        let (j, k) = if let Some((j, k)) = rest.split_once('_') {
            (j.parse().map_err(|_| bad())?, k.parse().map_err(|_| bad())?)
        } else {
            let digits: Vec<u32> = rest.chars().map(|c| c.to_digit(10)).collect::<Option<_>>().ok_or_else(bad)?;
            if digits.len() != 2 {
                return Err(bad());
            }
            (digits[0] as usize, digits[1] as usize)
        };
        Ok(Party { kind, j, k })
    }
}

/// The inflation graph of a given size with its canonical party list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InflationGraph {
    size: InflationSize,
    parties: Vec<Party>,
    offsets: [usize; 3],
}

impl InflationGraph {
    pub fn new(size: InflationSize) -> Self {
        let mut parties = Vec::with_capacity(size.party_count());
        let mut offsets = [0; 3];
        for t in PartyType::ALL {
            offsets[t.index()] = parties.len();
            let (sj, sk) = t.parent_sources();
            for j in 0..size.copies(sj) {
                for k in 0..size.copies(sk) {
                    parties.push(Party::new(t, j, k));
                }
            }
        }
        InflationGraph { size, parties, offsets }
    }

    pub fn size(&self) -> InflationSize {
        self.size
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party_count(&self) -> usize {
        self.parties.len()
    }

    pub fn party(&self, index: usize) -> Party {
        self.parties[index]
    }

    pub fn index_of(&self, party: &Party) -> Option<usize> {
        if !party.fits(&self.size) {
            return None;
        }
        let (_, sk) = party.kind.parent_sources();
        Some(self.offsets[party.kind.index()] + party.j * self.size.copies(sk) + party.k)
    }

    pub fn require_index(&self, party: &Party) -> Result<usize> {
        self.index_of(party).ok_or_else(|| Error::UnknownParty(party.to_string()))
    }

    pub fn parse_party(&self, name: &str) -> Result<Party> {
        let p: Party = name.parse()?;
        self.require_index(&p)?;
        Ok(p)
    }

    /// Parent `(source, copy)` pairs of a set of parties.
    pub fn parent_sources<'a, I>(&self, parties: I) -> BTreeSet<(usize, usize)>
    where
        I: IntoIterator<Item = &'a Party>,
    {
        parties.into_iter().flat_map(|p| p.parents()).collect()
    }

    /// Two party sets are d-separated iff no source feeds both.
    pub fn d_separated(&self, left: &[Party], right: &[Party]) -> bool {
        let l = self.parent_sources(left);
        let r = self.parent_sources(right);
        l.is_disjoint(&r)
    }

    /// Whether the ancestral subgraph of `parties` is isomorphic to the
    /// triangle network restricted to the corresponding party types: the
    /// types are distinct and each pair of types shares exactly the source
    /// that links them in the triangle.
    pub fn is_injectable(&self, parties: &[Party]) -> bool {
        if parties.is_empty() || parties.iter().any(|p| self.index_of(p).is_none()) {
            return false;
        }
        let mut by_type: [Option<Party>; 3] = [None; 3];
        for p in parties {
            let slot = &mut by_type[p.kind.index()];
            if slot.is_some() {
                return false;
            }
            *slot = Some(*p);
        }
        // types t and t+1 share source t+2: k of the former equals j of the latter
        for t in 0..3 {
            if let (Some(a), Some(b)) = (by_type[t], by_type[(t + 1) % 3]) {
                if a.k != b.j {
                    return false;
                }
            }
        }
        true
    }
}

/// Base-`nouts` positional coding of outcome strings of fixed length, most
/// significant digit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventCodec {
    nouts: u64,
    len: usize,
    count: u64,
}

impl EventCodec {
    pub fn new(nouts: usize, len: usize) -> Result<Self> {
        if nouts == 0 || nouts > MAX_DEGREE {
            return Err(Error::InvalidOutcomeCount(nouts));
        }
        let count = (nouts as u64)
            .checked_pow(len as u32)
            .ok_or(Error::IndexOverflow { nouts, len })?;
        Ok(EventCodec { nouts: nouts as u64, len, count })
    }

    pub fn nouts(&self) -> usize {
        self.nouts as usize
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of distinct events, `nouts^len`.
    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    pub fn encode(&self, digits: &[u8]) -> u64 {
        debug_assert_eq!(digits.len(), self.len);
        digits.iter().fold(0u64, |acc, &d| acc * self.nouts + d as u64)
    }

    #[inline]
    pub fn decode_into(&self, mut index: u64, digits: &mut [u8]) {
        debug_assert_eq!(digits.len(), self.len);
        for d in digits.iter_mut().rev() {
            *d = (index % self.nouts) as u8;
            index /= self.nouts;
        }
    }

    pub fn decode(&self, index: u64) -> Vec<u8> {
        let mut digits = vec![0; self.len];
        self.decode_into(index, &mut digits);
        digits
    }
}

/// An assignment of outcomes to a set of parties, kept in canonical party
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    scope: Vec<Party>,
    outcomes: Vec<u8>,
    nouts: usize,
}

impl Event {
    pub fn new(pairs: Vec<(Party, u8)>, nouts: usize) -> Result<Self> {
        if nouts == 0 || nouts > MAX_DEGREE {
            return Err(Error::InvalidOutcomeCount(nouts));
        }
        let mut pairs = pairs;
        pairs.sort_by_key(|(p, _)| *p);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidEvent("duplicate party in scope".into()));
        }
        if let Some((p, o)) = pairs.iter().find(|(_, o)| *o as usize >= nouts) {
            return Err(Error::InvalidEvent(format!("outcome {o} of {p} out of range for nouts={nouts}")));
        }
        let (scope, outcomes) = pairs.into_iter().unzip();
        Ok(Event { scope, outcomes, nouts })
    }

    pub fn from_parts(scope: Vec<Party>, outcomes: Vec<u8>, nouts: usize) -> Result<Self> {
        if scope.len() != outcomes.len() {
            return Err(Error::InvalidEvent(format!(
                "{} parties but {} outcomes",
                scope.len(),
                outcomes.len()
            )));
        }
        Event::new(scope.into_iter().zip(outcomes).collect(), nouts)
    }

    /// The event on `scope` with canonical index `index`.
    pub fn decode(scope: &[Party], index: u64, nouts: usize) -> Result<Self> {
        let codec = EventCodec::new(nouts, scope.len())?;
        if index >= codec.count() {
            return Err(Error::InvalidEvent(format!("index {index} out of range")));
        }
        let mut sorted = scope.to_vec();
        sorted.sort();
        Event::from_parts(sorted, codec.decode(index), nouts)
    }

    pub fn empty(nouts: usize) -> Result<Self> {
        Event::new(Vec::new(), nouts)
    }

    pub fn scope(&self) -> &[Party] {
        &self.scope
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    pub fn nouts(&self) -> usize {
        self.nouts
    }

    pub fn outcome_of(&self, party: &Party) -> Option<u8> {
        self.scope.binary_search(party).ok().map(|i| self.outcomes[i])
    }

    pub fn encode(&self) -> Result<u64> {
        let codec = EventCodec::new(self.nouts, self.scope.len())?;
        Ok(codec.encode(&self.outcomes))
    }

    pub fn restrict(&self, subscope: &[Party]) -> Result<Event> {
        let mut pairs = Vec::with_capacity(subscope.len());
        for p in subscope {
            let o = self
                .outcome_of(p)
                .ok_or_else(|| Error::InvalidEvent(format!("{p} is not in the event's scope")))?;
            pairs.push((*p, o));
        }
        Event::new(pairs, self.nouts)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.scope.iter().zip(&self.outcomes).map(|(p, o)| format!("{p}={o}")).collect();
        write!(f, "[{}]", items.join(" "))
    }
}
