//! Dense rational reference implementations used as test oracles. These
//! work on explicit vectors over all `nouts^12` events of the (2,2,2)
//! graph and share nothing with the streaming code beyond the party action.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use triangle_inflation::constraints::{CanonicalConstraint, ConstraintSpec};
use triangle_inflation::events::{InflationGraph, InflationSize, PartyType};
use triangle_inflation::symmetry::{InflationSymmetry, SymmetryGroup};
use triangle_inflation::target::RationalDistribution;

pub mod checks;

pub type Q = BigRational;

pub const C0: &str = "({A00,B00,C00},{A11,B11,C11},∅)";
pub const C1: &str = "({A00},{A11,B10,B11,C01,C11})";

pub fn graph222() -> InflationGraph {
    InflationGraph::new(InflationSize::new(2, 2, 2).unwrap())
}

pub fn spec(name: &str, tuple: &str, g: &InflationGraph) -> ConstraintSpec {
    ConstraintSpec::parse_tuple(name, tuple, g).unwrap()
}

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn digits(mut index: usize, nouts: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % nouts;
        index /= nouts;
    }
    out
}

pub fn index(digits: &[usize], nouts: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * nouts + d)
}

/// Index of `g(e)` for a full event index, via per-party images.
pub fn event_image(graph: &InflationGraph, g: &InflationSymmetry, nouts: usize, e: usize) -> usize {
    let size = graph.size();
    let d = digits(e, nouts, graph.party_count());
    let mut out = vec![0; d.len()];
    for (i, p) in graph.parties().iter().enumerate() {
        let image = g.apply_to_party(&size, p).unwrap();
        out[graph.index_of(&image).unwrap()] = g.outcome.apply(d[i]);
    }
    index(&out, nouts)
}

/// `images[g][e]` for every group element and full event.
pub fn image_table(graph: &InflationGraph, group: &SymmetryGroup) -> Vec<Vec<usize>> {
    let n = group.nouts().pow(graph.party_count() as u32);
    group
        .elements()
        .iter()
        .map(|g| (0..n).map(|e| event_image(graph, g, group.nouts(), e)).collect())
        .collect()
}

/// `T(q) = |G|⁻¹ Σ_g g(q)` where `g(q)(g(e)) = q(e)`.
pub fn twirl(images: &[Vec<usize>], v: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::zero(); v.len()];
    for table in images {
        for (e, x) in v.iter().enumerate().filter(|(_, x)| !x.is_zero()) {
            out[table[e]] += x;
        }
    }
    let k = Q::from_integer(BigInt::from(images.len()));
    out.into_iter().map(|x| x / &k).collect()
}

/// Marginal of a full-event vector on the parties `scope` (graph indices,
/// sorted), indexed in scope order.
pub fn marginal(v: &[Q], scope: &[usize], nouts: usize, parties: usize) -> Vec<Q> {
    let mut out = vec![Q::zero(); nouts.pow(scope.len() as u32)];
    for (e, x) in v.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        let d = digits(e, nouts, parties);
        let mu: Vec<usize> = scope.iter().map(|&p| d[p]).collect();
        out[index(&mu, nouts)] += x;
    }
    out
}

/// `C_c(q)(μ) = q_S(μ) - Π_i p_{T_i}(μ_{T_i}) q_R(μ_R)` over `μ` on
/// `scope(c)`.
pub fn constraint_map(graph: &InflationGraph, c: &CanonicalConstraint, p: &RationalDistribution, v: &[Q]) -> Vec<Q> {
    let nouts = p.nouts();
    let n = graph.party_count();
    let scope = c.scope();
    let q_s = marginal(v, &scope, nouts, n);
    let q_r = marginal(v, &c.residual, nouts, n);
    let prod = target_product(graph, c, p);
    (0..q_s.len())
        .map(|m| {
            let mu = digits(m, nouts, scope.len());
            let r: Vec<usize> = c.residual.iter().map(|&party| mu[scope.binary_search(&party).unwrap()]).collect();
            &q_s[m] - &prod[m] * &q_r[index(&r, nouts)]
        })
        .collect()
}

/// `Π_i p_{T_i}(μ_{T_i})` for every `μ` on `scope(c)`.
pub fn target_product(graph: &InflationGraph, c: &CanonicalConstraint, p: &RationalDistribution) -> Vec<Q> {
    let nouts = p.nouts();
    let scope = c.scope();
    let pos = |party: usize| scope.iter().position(|&s| s == party).unwrap();
    (0..nouts.pow(scope.len() as u32))
        .map(|m| {
            let mu = digits(m, nouts, scope.len());
            let mut prod = Q::one();
            for t in &c.targets {
                let mut abc = [0usize; 3];
                let mut types = Vec::new();
                for &party in t {
                    let kind = graph.party(party).kind;
                    abc[kind.index()] = mu[pos(party)];
                    types.push(kind);
                }
                prod *= target_marginal(p, &types, abc);
            }
            prod
        })
        .collect()
}

/// `p_types(a)` summing out the other parties.
pub fn target_marginal(p: &RationalDistribution, types: &[PartyType], abc: [usize; 3]) -> Q {
    let n = p.nouts();
    let mut total = 0u64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let x = [a, b, c];
                if types.iter().all(|t| x[t.index()] == abc[t.index()]) {
                    total += p.numerator(a, b, c);
                }
            }
        }
    }
    q(total as i64, p.denominator() as i64)
}

/// Orbits of marginal events on `scope` under `group`, found by closing
/// each event under the explicit party action. Returns the orbit label of
/// every marginal event (orbits numbered by smallest member).
pub fn marginal_orbits(graph: &InflationGraph, group: &SymmetryGroup, scope: &[usize]) -> Vec<usize> {
    let nouts = group.nouts();
    let n = nouts.pow(scope.len() as u32);
    let size = graph.size();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let d = digits(start, nouts, scope.len());
        for g in group.elements() {
            let mut out = vec![0; scope.len()];
            for (i, &party) in scope.iter().enumerate() {
                let image = g.apply_to_party(&size, &graph.party(party)).unwrap();
                let at = scope.iter().position(|&s| s == graph.index_of(&image).unwrap()).unwrap();
                out[at] = g.outcome.apply(d[i]);
            }
            label[index(&out, nouts)] = next;
        }
        next += 1;
    }
    label
}

/// `R`: sums a marginal vector over orbits.
pub fn reduce(labels: &[usize], v: &[Q]) -> Vec<Q> {
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Q::zero(); count];
    for (l, x) in labels.iter().zip(v) {
        out[*l] += x;
    }
    out
}

/// `R†`: spreads each orbit value evenly over its members.
pub fn embed(labels: &[usize], w: &[Q]) -> Vec<Q> {
    let mut sizes = vec![0i64; w.len()];
    for &l in labels {
        sizes[l] += 1;
    }
    labels.iter().map(|&l| &w[l] / Q::from_integer(BigInt::from(sizes[l]))).collect()
}

pub fn random_rational<R: Rng>(rng: &mut R) -> Q {
    q(rng.gen_range(-20..=20), rng.gen_range(1..=7))
}

/// A random distribution `P/D` with `nouts` outcomes and denominator at
/// most `max_d`.
pub fn random_target<R: Rng>(rng: &mut R, nouts: usize, max_d: u64) -> RationalDistribution {
    let d = rng.gen_range(1..=max_d);
    let cells = nouts.pow(3);
    let mut numerators = vec![0u64; cells];
    for _ in 0..d {
        numerators[rng.gen_range(0..cells)] += 1;
    }
    RationalDistribution::new(nouts, numerators, d).unwrap()
}

/// Exact feasibility of `{y >= 0 : A y = b}` by a phase-one simplex with
/// Bland's rule over the rationals.
pub fn feasible(a: &[Vec<BigInt>], b: &[Q]) -> bool {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    // tableau [A | I | b] with b >= 0, artificial basis
    let width = cols + rows + 1;
    let mut t: Vec<Vec<Q>> = Vec::with_capacity(rows);
    for i in 0..rows {
        let flip = b[i].is_negative();
        let mut row: Vec<Q> = a[i].iter().map(|x| Q::from_integer(if flip { -x } else { x.clone() })).collect();
        row.extend((0..rows).map(|j| if i == j { Q::one() } else { Q::zero() }));
        row.push(if flip { -b[i].clone() } else { b[i].clone() });
        t.push(row);
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    // reduced costs of the phase-one objective (sum of artificials)
    let mut cost: Vec<Q> = vec![Q::zero(); width];
    for row in &t {
        for (c, x) in cost.iter_mut().zip(row) {
            *c -= x;
        }
    }
    for c in cost.iter_mut().skip(cols).take(rows) {
        *c = Q::zero();
    }
    while let Some(enter) = (0..cols + rows).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..rows {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((l, r)) => ratio < *r || (ratio == *r && basis[i] < basis[*l]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (r, _) = leave.expect("phase one is bounded");
        let piv = t[r][enter].clone();
        for x in t[r].iter_mut() {
            *x /= &piv;
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        let f = cost[enter].clone();
        for (x, y) in cost.iter_mut().zip(&pivot_row) {
            if !y.is_zero() {
                *x -= &f * y;
            }
        }
        basis[r] = enter;
    }
    // objective value is -cost[rhs]
    cost[width - 1].is_zero()
}

/// The unreduced feasibility system for one constraint on (2,2,2): a
/// source-symmetric distribution over all events (one variable per
/// source orbit, the per-event weight) whose marginal satisfies `c`.
pub fn unreduced_system(graph: &InflationGraph, c: &CanonicalConstraint, p: &RationalDistribution) -> (Vec<Vec<BigInt>>, Vec<Q>) {
    let nouts = p.nouts();
    let n = graph.party_count();
    let sources = SymmetryGroup::sources(graph, nouts);
    let total = nouts.pow(n as u32);
    let mut orbit_of = vec![usize::MAX; total];
    let mut orbits = 0;
    for e in 0..total {
        if orbit_of[e] != usize::MAX {
            continue;
        }
        for g in sources.elements() {
            orbit_of[event_image(graph, g, nouts, e)] = orbits;
        }
        orbits += 1;
    }
    assert!(c.residual.is_empty(), "only factorization constraints");
    let scope = c.scope();
    let rows = nouts.pow(scope.len() as u32);
    let mut a = vec![vec![BigInt::zero(); orbits]; rows];
    for e in 0..total {
        let d = digits(e, nouts, n);
        let mu: Vec<usize> = scope.iter().map(|&s| d[s]).collect();
        a[index(&mu, nouts)][orbit_of[e]] += 1;
    }
    let b = target_product(graph, c, p);
    (a, b)
}
