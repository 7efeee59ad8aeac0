//! Marginal constraints on inflation distributions, their orbits under the
//! target's symmetry group, and the reduced coordinate space they span.
//!
//! A constraint `(T_1, ..., T_k, R)` asks the inflation marginal on
//! `T_1 ∪ ... ∪ T_k ∪ R` to equal `p_{T_1} ⋯ p_{T_k} · q_R`. An empty
//! residual `R` gives a factorization constraint, a nonempty one an LPI
//! constraint.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::events::{InflationGraph, Party, PartyType};
use crate::symmetry::{GroupKind, OrbitStrategy, Orbits, SymmetryGroup};

/// A named constraint in terms of parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSpec {
    pub name: String,
    pub targets: Vec<Vec<Party>>,
    pub residual: Vec<Party>,
}

impl ConstraintSpec {
    pub fn new(name: impl Into<String>, mut targets: Vec<Vec<Party>>, mut residual: Vec<Party>) -> Self {
        for t in &mut targets {
            t.sort();
        }
        residual.sort();
        ConstraintSpec { name: name.into(), targets, residual }
    }

    /// Parses tuple notation such as `({A00,B00,C00},{A11,B11,C11},∅)`:
    /// every group but the last is a target group, the last one is the
    /// residual (`∅` or `{}` for none).
    pub fn parse_tuple(name: impl Into<String>, text: &str, graph: &InflationGraph) -> Result<Self> {
        let body = text.trim();
        let body = body
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .ok_or_else(|| Error::ConstraintSyntax(format!("expected a parenthesised tuple, got {text:?}")))?;
        let mut groups: Vec<Vec<Party>> = Vec::new();
        let mut rest = body.trim();
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix('∅') {
                groups.push(Vec::new());
                rest = r;
            } else if let Some(r) = rest.strip_prefix('{') {
                let end = r
                    .find('}')
                    .ok_or_else(|| Error::ConstraintSyntax(format!("unclosed brace in {text:?}")))?;
                let parties = r[..end]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| graph.parse_party(s))
                    .collect::<Result<Vec<_>>>()?;
                groups.push(parties);
                rest = &r[end + 1..];
            } else {
                return Err(Error::ConstraintSyntax(format!("unexpected input {rest:?} in {text:?}")));
            }
            rest = rest.trim_start();
            if let Some(r) = rest.strip_prefix(',') {
                rest = r.trim_start();
            } else if !rest.is_empty() {
                return Err(Error::ConstraintSyntax(format!("expected ',' before {rest:?}")));
            }
        }
        let residual = groups.pop().unwrap_or_default();
        let spec = ConstraintSpec::new(name, groups, residual);
        spec.validate(graph)?;
        Ok(spec)
    }

    /// Number of target groups, the power of `D` in the exact scaling.
    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn scope(&self) -> Vec<Party> {
        let mut s: Vec<Party> = self.targets.iter().flatten().chain(&self.residual).copied().collect();
        s.sort();
        s
    }

    pub fn validate(&self, graph: &InflationGraph) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConstraint(format!("{}: {msg}", self.name)));
        if self.targets.is_empty() {
            return bad("at least one target group is required".into());
        }
        for p in self.targets.iter().flatten().chain(&self.residual) {
            graph.require_index(p)?;
        }
        let mut groups: Vec<&[Party]> = self.targets.iter().map(Vec::as_slice).collect();
        if !self.residual.is_empty() {
            groups.push(&self.residual);
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.is_empty() {
                return bad(format!("target group {i} is empty"));
            }
            if !graph.is_injectable(t) {
                return bad(format!("target group {} is not injectable", fmt_group(t)));
            }
        }
        for (i, a) in groups.iter().enumerate() {
            let unique: BTreeSet<&Party> = a.iter().collect();
            if unique.len() != a.len() {
                return bad(format!("group {} repeats a party", fmt_group(a)));
            }
            for b in &groups[i + 1..] {
                if a.iter().any(|p| b.contains(p)) {
                    return bad(format!("groups {} and {} overlap", fmt_group(a), fmt_group(b)));
                }
                if !graph.d_separated(a, b) {
                    return bad(format!("groups {} and {} share a source", fmt_group(a), fmt_group(b)));
                }
            }
        }
        Ok(())
    }
}

fn fmt_group(parties: &[Party]) -> String {
    if parties.is_empty() {
        return "∅".into();
    }
    let names: Vec<String> = parties.iter().map(Party::to_string).collect();
    format!("{{{}}}", names.join(","))
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let groups: Vec<String> = self.targets.iter().map(|t| fmt_group(t)).collect();
        write!(f, "({},{})", groups.join(","), fmt_group(&self.residual))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    #[serde(default)]
    constraint: Vec<ConstraintEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintEntry {
    name: Option<String>,
    tuple: Option<String>,
    targets: Option<Vec<Vec<String>>>,
    residual: Option<Vec<String>>,
}

/// Parses a TOML constraint set. Each `[[constraint]]` table has an optional
/// `name` and either `tuple = "(...)"` or `targets = [[...], ...]` with an
/// optional `residual = [...]`.
pub fn parse_constraint_set(text: &str, graph: &InflationGraph) -> Result<Vec<ConstraintSpec>> {
    let file: ConstraintFile = toml::from_str(text).map_err(|e| Error::ConstraintSyntax(e.to_string()))?;
    if file.constraint.is_empty() {
        return Err(Error::ConstraintSyntax("no [[constraint]] entries".into()));
    }
    file.constraint
        .into_iter()
        .enumerate()
        .map(|(i, entry)| {
            let name = entry.name.unwrap_or_else(|| format!("c{i}"));
            match (entry.tuple, entry.targets) {
                (Some(t), None) if entry.residual.is_none() => ConstraintSpec::parse_tuple(name, &t, graph),
                (None, Some(targets)) => {
                    let parse = |names: &[String]| names.iter().map(|n| graph.parse_party(n)).collect::<Result<Vec<_>>>();
                    let targets = targets.iter().map(|t| parse(t)).collect::<Result<Vec<_>>>()?;
                    let residual = parse(entry.residual.as_deref().unwrap_or_default())?;
                    let spec = ConstraintSpec::new(name, targets, residual);
                    spec.validate(graph)?;
                    Ok(spec)
                }
                _ => Err(Error::ConstraintSyntax(format!(
                    "constraint {name}: give either `tuple` or `targets` (with optional `residual`)"
                ))),
            }
        })
        .collect()
}

pub fn load_constraint_set(path: &Path, graph: &InflationGraph) -> Result<Vec<ConstraintSpec>> {
    parse_constraint_set(&std::fs::read_to_string(path)?, graph)
}

/// A constraint in graph party indices with sorted groups and a sorted list
/// of target groups; two constraints are the same iff their canonical forms
/// are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalConstraint {
    pub targets: Vec<Vec<usize>>,
    pub residual: Vec<usize>,
}

impl CanonicalConstraint {
    pub fn from_spec(spec: &ConstraintSpec, graph: &InflationGraph) -> Result<Self> {
        let index = |g: &[Party]| -> Result<Vec<usize>> {
            let mut v = g.iter().map(|p| graph.require_index(p)).collect::<Result<Vec<_>>>()?;
            v.sort_unstable();
            Ok(v)
        };
        let mut targets = spec.targets.iter().map(|t| index(t)).collect::<Result<Vec<_>>>()?;
        targets.sort();
        Ok(CanonicalConstraint { targets, residual: index(&spec.residual)? })
    }

    /// Image under a party map (graph index to graph index).
    pub fn map(&self, party_map: &[u16]) -> Self {
        let image = |g: &[usize]| {
            let mut v: Vec<usize> = g.iter().map(|&p| party_map[p] as usize).collect();
            v.sort_unstable();
            v
        };
        let mut targets: Vec<Vec<usize>> = self.targets.iter().map(|t| image(t)).collect();
        targets.sort();
        CanonicalConstraint { targets, residual: image(&self.residual) }
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn scope(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.targets.iter().flatten().chain(&self.residual).copied().collect();
        s.sort_unstable();
        s
    }

    pub fn to_spec(&self, name: &str, graph: &InflationGraph) -> ConstraintSpec {
        let parties = |g: &[usize]| g.iter().map(|&i| graph.party(i)).collect::<Vec<_>>();
        ConstraintSpec::new(name, self.targets.iter().map(|t| parties(t)).collect(), parties(&self.residual))
    }

    /// Tuple notation with party names.
    pub fn display(&self, graph: &InflationGraph) -> String {
        self.to_spec("", graph).to_string()
    }
}

/// All constraints implied by one input constraint under `G_p`.
#[derive(Debug, Clone)]
pub struct ConstraintOrbit {
    /// Name of the first input constraint in this orbit.
    pub name: String,
    /// The minimal canonical image.
    pub representative: CanonicalConstraint,
    /// Distinct images under `G_p`, sorted.
    pub images: Vec<CanonicalConstraint>,
    /// Number of images up to source permutations, i.e. the distinct
    /// constraints obtained by relabelling parties and outcomes only.
    pub party_orbit_size: usize,
    /// `H_c`: the elements of `G_p` mapping the representative to itself.
    pub stabilizer: SymmetryGroup,
}

/// Groups the input constraints into orbits under `group`, merging inputs
/// that imply each other. Orbits are listed in canonical order.
pub fn expand_constraint_orbits(
    specs: &[ConstraintSpec],
    graph: &InflationGraph,
    group: &SymmetryGroup,
) -> Result<Vec<ConstraintOrbit>> {
    let sources = SymmetryGroup::sources(graph, group.nouts());
    let mut orbits: Vec<ConstraintOrbit> = Vec::new();
    for spec in specs {
        spec.validate(graph)?;
        let c = CanonicalConstraint::from_spec(spec, graph)?;
        let images: BTreeSet<CanonicalConstraint> = (0..group.order()).map(|g| c.map(group.party_map(g))).collect();
        let representative = images.first().expect("identity image").clone();
        if orbits.iter().any(|o| o.representative == representative) {
            continue;
        }
        let source_classes: BTreeSet<CanonicalConstraint> = images
            .iter()
            .map(|img| (0..sources.order()).map(|s| img.map(sources.party_map(s))).min().expect("nonempty"))
            .collect();
        let maps: Vec<&[u16]> = (0..group.order()).map(|g| group.party_map(g)).collect();
        let keep: Vec<bool> = maps.iter().map(|m| representative.map(m) == representative).collect();
        let elements: Vec<_> = group
            .elements()
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(g, _)| *g)
            .collect();
        let stabilizer = SymmetryGroup::new(graph, group.nouts(), elements, GroupKind::Constraint)?;
        debug_assert_eq!(stabilizer.order() * images.len(), group.order());
        orbits.push(ConstraintOrbit {
            name: spec.name.clone(),
            representative,
            party_orbit_size: source_classes.len(),
            images: images.into_iter().collect(),
            stabilizer,
        });
    }
    orbits.sort_by(|a, b| a.representative.cmp(&b.representative));
    Ok(orbits)
}

/// One constraint orbit's slice of the reduced coordinate space.
#[derive(Debug, Clone)]
pub struct ConstraintBlock {
    pub orbit: ConstraintOrbit,
    /// `scope(c)` as sorted graph indices.
    pub scope: Vec<usize>,
    /// Positions within `scope` of each target group's parties.
    pub target_positions: Vec<Vec<usize>>,
    /// Party types of each target group, sorted.
    pub target_types: Vec<Vec<PartyType>>,
    /// Positions within `scope` of the residual parties.
    pub residual_positions: Vec<usize>,
    /// `H_c`-orbits of the marginal events on `scope`, labelled.
    pub marginal_orbits: Orbits,
    /// Index of this block's first coordinate.
    pub offset: usize,
}

impl ConstraintBlock {
    pub fn k(&self) -> usize {
        self.orbit.representative.k()
    }

    pub fn len(&self) -> usize {
        self.marginal_orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginal_orbits.is_empty()
    }
}

/// The coordinates `W = ⊕_c R^{orbits(E_scope(c), H_c)}`.
#[derive(Debug, Clone)]
pub struct ReducedConstraintSpace {
    blocks: Vec<ConstraintBlock>,
    n_cons: usize,
}

impl ReducedConstraintSpace {
    pub fn build(graph: &InflationGraph, orbits: Vec<ConstraintOrbit>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(orbits.len());
        let mut offset = 0;
        for orbit in orbits {
            let rep = &orbit.representative;
            let scope = rep.scope();
            let position = |p: &usize| scope.binary_search(p).expect("group party lies in scope");
            let target_positions: Vec<Vec<usize>> = rep.targets.iter().map(|t| t.iter().map(position).collect()).collect();
            let target_types = rep
                .targets
                .iter()
                .map(|t| t.iter().map(|&p| graph.party(p).kind).collect())
                .collect();
            let residual_positions = rep.residual.iter().map(position).collect();
            let action = orbit.stabilizer.scoped_action(&scope)?;
            let marginal_orbits = Orbits::enumerate(&action, OrbitStrategy::Auto, true)?;
            let len = marginal_orbits.len();
            blocks.push(ConstraintBlock {
                orbit,
                scope,
                target_positions,
                target_types,
                residual_positions,
                marginal_orbits,
                offset,
            });
            offset += len;
        }
        Ok(ReducedConstraintSpace { blocks, n_cons: offset })
    }

    pub fn blocks(&self) -> &[ConstraintBlock] {
        &self.blocks
    }

    pub fn n_cons(&self) -> usize {
        self.n_cons
    }

    /// Largest `k_c` over all blocks.
    pub fn max_k(&self) -> usize {
        self.blocks.iter().map(ConstraintBlock::k).max().unwrap_or(0)
    }

    /// Constraint count before symmetry reduction: `nouts^|scope|` for
    /// every constraint in each orbit up to source permutations.
    pub fn unreduced_count(&self, nouts: usize) -> u128 {
        self.blocks
            .iter()
            .map(|b| b.orbit.party_orbit_size as u128 * (nouts as u128).pow(b.scope.len() as u32))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::InflationSize;
    use crate::target::RationalDistribution;

    fn graph222() -> InflationGraph {
        InflationGraph::new(InflationSize::new(2, 2, 2).unwrap())
    }

    pub(crate) const C0: &str = "({A00,B00,C00},{A11,B11,C11},∅)";
    pub(crate) const C1: &str = "({A00},{A11,B10,B11,C01,C11})";

    #[test]
    fn parses_tuple_notation() {
        let g = graph222();
        let c0 = ConstraintSpec::parse_tuple("c0", C0, &g).unwrap();
        assert_eq!(c0.k(), 2);
        assert!(c0.residual.is_empty());
        assert_eq!(c0.to_string(), "({A00,B00,C00},{A11,B11,C11},∅)");
        let c1 = ConstraintSpec::parse_tuple("c1", C1, &g).unwrap();
        assert_eq!(c1.k(), 1);
        assert_eq!(c1.residual.len(), 5);
        assert_eq!(c1.scope().len(), 6);
    }

    #[test]
    fn rejects_invalid_constraints() {
        let g = graph222();
        // C00 shares α_0 with B00
        assert!(matches!(ConstraintSpec::parse_tuple("x", "({A00,B00},{C00},∅)", &g), Err(Error::InvalidConstraint(_))));
        assert!(matches!(ConstraintSpec::parse_tuple("x", "({A00},{A00,B11})", &g), Err(Error::InvalidConstraint(_))));
        assert!(matches!(ConstraintSpec::parse_tuple("x", "({A00,A11},∅)", &g), Err(Error::InvalidConstraint(_))));
        assert!(matches!(ConstraintSpec::parse_tuple("x", "({A00,B11},∅)", &g), Err(Error::InvalidConstraint(_))));
        assert!(matches!(ConstraintSpec::parse_tuple("x", "({A00})", &g), Err(Error::InvalidConstraint(_))));
        assert!(matches!(ConstraintSpec::parse_tuple("x", "({A02},∅)", &g), Err(Error::UnknownParty(_))));
        assert!(matches!(ConstraintSpec::parse_tuple("x", "{A00}", &g), Err(Error::ConstraintSyntax(_))));
    }

    #[test]
    fn parses_toml_files() {
        let g = graph222();
        let text = r#"
[[constraint]]
name = "c0"
targets = [["A00", "B00", "C00"], ["A11", "B11", "C11"]]

[[constraint]]
name = "c1"
tuple = "({A00},{A11,B10,B11,C01,C11})"
"#;
        let specs = parse_constraint_set(text, &g).unwrap();
        assert_eq!(specs[0], ConstraintSpec::parse_tuple("c0", C0, &g).unwrap());
        assert_eq!(specs[1], ConstraintSpec::parse_tuple("c1", C1, &g).unwrap());
        assert!(parse_constraint_set("", &g).is_err());
        assert!(parse_constraint_set("[[constraint]]\nname = \"x\"\n", &g).is_err());
    }

    #[test]
    fn ejm_constraint_orbits() {
        let g = graph222();
        let gp = SymmetryGroup::distribution_group(&g, &RationalDistribution::ejm()).unwrap();
        let c0 = ConstraintSpec::parse_tuple("c0", C0, &g).unwrap();
        let c1 = ConstraintSpec::parse_tuple("c1", C1, &g).unwrap();
        let orbits = expand_constraint_orbits(std::slice::from_ref(&c0), &g, &gp).unwrap();
        assert_eq!(orbits.len(), 1);
        assert_eq!(orbits[0].party_orbit_size, 1);
        assert_eq!(orbits[0].stabilizer.order(), 288);
        for h in orbits[0].stabilizer.elements() {
            let s = h.source.perms;
            assert!(s[0] == s[1] && s[1] == s[2]);
        }
        let orbits = expand_constraint_orbits(&[c1], &g, &gp).unwrap();
        assert_eq!(orbits[0].party_orbit_size, 3);
        assert_eq!(orbits[0].images.len() * orbits[0].stabilizer.order(), 1152);
        // the same constraint twice collapses
        assert_eq!(expand_constraint_orbits(&[c0.clone(), c0], &g, &gp).unwrap().len(), 1);
    }

    #[test]
    fn trivial_group_orbit() {
        let g = graph222();
        let trivial = SymmetryGroup::trivial(&g, 2);
        let c1 = ConstraintSpec::parse_tuple("c1", C1, &g).unwrap();
        let orbits = expand_constraint_orbits(std::slice::from_ref(&c1), &g, &trivial).unwrap();
        assert_eq!(orbits[0].images.len(), 1);
        assert_eq!(orbits[0].stabilizer.order(), 1);
        assert_eq!(orbits[0].representative, CanonicalConstraint::from_spec(&c1, &g).unwrap());
    }

    #[test]
    fn reduced_space_sizes() {
        let g = graph222();
        let c0 = ConstraintSpec::parse_tuple("c0", C0, &g).unwrap();
        let c1 = ConstraintSpec::parse_tuple("c1", C1, &g).unwrap();
        let ejm = SymmetryGroup::distribution_group(&g, &RationalDistribution::ejm()).unwrap();
        let space = ReducedConstraintSpace::build(&g, expand_constraint_orbits(std::slice::from_ref(&c0), &g, &ejm).unwrap()).unwrap();
        assert_eq!(space.n_cons(), 33);
        assert_eq!(space.unreduced_count(4), 4096);
        assert_eq!(space.blocks()[0].marginal_orbits.sizes().iter().sum::<u64>(), 4096);
        let srb = SymmetryGroup::distribution_group(&g, &RationalDistribution::srb_family(1, 2).unwrap()).unwrap();
        let space = ReducedConstraintSpace::build(&g, expand_constraint_orbits(std::slice::from_ref(&c0), &g, &srb).unwrap()).unwrap();
        assert_eq!(space.n_cons(), 8);
        let space = ReducedConstraintSpace::build(&g, expand_constraint_orbits(&[c0, c1], &g, &srb).unwrap()).unwrap();
        assert_eq!(space.n_cons(), 22);
        assert_eq!(space.max_k(), 2);
    }
}
