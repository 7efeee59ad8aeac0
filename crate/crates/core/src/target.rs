//! Exact rational target distributions `p(a,b,c) = P(a,b,c) / D` on the
//! triangle network and the visibility families used in the studies.

use std::fmt::Write as _;
use std::path::Path;

use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::events::{PartyType, MAX_DEGREE};
use crate::perm::Perm;

/// A distribution over `(a, b, c)` with integer numerators and a common
/// denominator, always stored in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalDistribution {
    nouts: usize,
    numerators: Vec<u64>,
    denominator: u64,
}

/// Which noise family a visibility refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Shared random bit with white noise, two outcomes.
    SharedRandomBit,
    /// Purified EJM mixed with white noise, four outcomes.
    EjmNoise,
}

impl Family {
    pub fn at(self, v_num: u64, v_den: u64) -> Result<RationalDistribution> {
        match self {
            Family::SharedRandomBit => RationalDistribution::srb_family(v_num, v_den),
            Family::EjmNoise => RationalDistribution::ejm_noise_family(v_num, v_den),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::SharedRandomBit => "srb",
            Family::EjmNoise => "ejm-noise",
        }
    }
}

impl RationalDistribution {
    /// `numerators` is indexed by `(a * nouts + b) * nouts + c`.
    pub fn new(nouts: usize, numerators: Vec<u64>, denominator: u64) -> Result<Self> {
        if nouts == 0 || nouts > MAX_DEGREE {
            return Err(Error::InvalidOutcomeCount(nouts));
        }
        if numerators.len() != nouts.pow(3) {
            return Err(Error::InvalidDistribution(format!(
                "expected {} numerators, got {}",
                nouts.pow(3),
                numerators.len()
            )));
        }
        if denominator == 0 {
            return Err(Error::InvalidDistribution("zero denominator".into()));
        }
        let total = numerators
            .iter()
            .try_fold(0u64, |acc, &x| acc.checked_add(x))
            .ok_or_else(|| Error::InvalidDistribution("numerator sum overflows".into()))?;
        if total != denominator {
            return Err(Error::InvalidDistribution(format!(
                "numerators sum to {total}, denominator is {denominator}"
            )));
        }
        let g = numerators.iter().fold(denominator, |g, &x| g.gcd(&x));
        Ok(RationalDistribution {
            nouts,
            numerators: numerators.into_iter().map(|x| x / g).collect(),
            denominator: denominator / g,
        })
    }

    pub fn from_fn(nouts: usize, denominator: u64, f: impl Fn(usize, usize, usize) -> u64) -> Result<Self> {
        let mut numerators = Vec::with_capacity(nouts.pow(3));
        for a in 0..nouts {
            for b in 0..nouts {
                for c in 0..nouts {
                    numerators.push(f(a, b, c));
                }
            }
        }
        RationalDistribution::new(nouts, numerators, denominator)
    }

    /// The Elegant Joint Measurement distribution.
    pub fn ejm() -> Self {
        Self::from_fn(4, 256, |a, b, c| match classify(a, b, c) {
            Pattern::AllEqual => 25,
            Pattern::AllDistinct => 5,
            Pattern::Other => 1,
        })
        .expect("EJM table is normalized")
    }

    /// `v * p_pure + (1 - v) / 64` with the purified EJM `p_pure` (1/8 on
    /// `a = b = c`, 1/48 on pairwise distinct outcomes, 0 otherwise).
    pub fn ejm_noise_family(v_num: u64, v_den: u64) -> Result<Self> {
        check_visibility(v_num, v_den)?;
        let (n, d) = (v_num, v_den);
        // over 192 d: p_pure = 24/192, 4/192, 0 and noise = 3/192
        let overflow = || Error::InvalidVisibility { num: v_num, den: v_den };
        let den = 192u64.checked_mul(d).ok_or_else(overflow)?;
        let equal = 21u64.checked_mul(n).and_then(|x| x.checked_add(3 * d)).ok_or_else(overflow)?;
        let distinct = n.checked_add(3u64.checked_mul(d).ok_or_else(overflow)?).ok_or_else(overflow)?;
        let other = 3 * (d - n);
        Self::from_fn(4, den, |a, b, c| match classify(a, b, c) {
            Pattern::AllEqual => equal,
            Pattern::AllDistinct => distinct,
            Pattern::Other => other,
        })
    }

    /// Shared random bit with visibility `v`: `v/2 + (1-v)/8` on `a = b = c`
    /// and `(1-v)/8` elsewhere.
    pub fn srb_family(v_num: u64, v_den: u64) -> Result<Self> {
        check_visibility(v_num, v_den)?;
        let (n, d) = (v_num, v_den);
        let overflow = || Error::InvalidVisibility { num: v_num, den: v_den };
        let den = 8u64.checked_mul(d).ok_or_else(overflow)?;
        let equal = 3u64.checked_mul(n).and_then(|x| x.checked_add(d)).ok_or_else(overflow)?;
        Self::from_fn(2, den, |a, b, c| if a == b && b == c { equal } else { d - n })
    }

    pub fn uniform(nouts: usize) -> Result<Self> {
        Self::from_fn(nouts, (nouts as u64).pow(3), |_, _, _| 1)
    }

    /// Parses the plain-text table format: a header line `nouts D` followed
    /// by lines `a b c numerator`. Missing triples are zero; `#` starts a
    /// comment.
    pub fn parse_table(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidDistribution(format!("line {line}: {msg}"));
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or_else(|| bad(1, "missing header `nouts D`"))?;
        let h: Vec<u64> = parse_ints(header).ok_or_else(|| bad(hline, "header must be two integers"))?;
        if h.len() != 2 {
            return Err(bad(hline, "header must be `nouts D`"));
        }
        let nouts = h[0] as usize;
        if nouts == 0 || nouts > MAX_DEGREE {
            return Err(Error::InvalidOutcomeCount(nouts));
        }
        let mut numerators = vec![None; nouts.pow(3)];
        for (ln, line) in lines {
            let v = parse_ints(line).ok_or_else(|| bad(ln, "expected four integers"))?;
            if v.len() != 4 {
                return Err(bad(ln, "expected `a b c numerator`"));
            }
            let (a, b, c) = (v[0] as usize, v[1] as usize, v[2] as usize);
            if a >= nouts || b >= nouts || c >= nouts {
                return Err(bad(ln, "outcome out of range"));
            }
            let slot = &mut numerators[(a * nouts + b) * nouts + c];
            if slot.is_some() {
                return Err(bad(ln, "duplicate entry"));
            }
            *slot = Some(v[3]);
        }
        RationalDistribution::new(nouts, numerators.into_iter().map(|x| x.unwrap_or(0)).collect(), h[1])
    }

    pub fn load_table(path: &Path) -> Result<Self> {
        Self::parse_table(&std::fs::read_to_string(path)?)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{} {}\n", self.nouts, self.denominator);
        for a in 0..self.nouts {
            for b in 0..self.nouts {
                for c in 0..self.nouts {
                    let _ = writeln!(s, "{a} {b} {c} {}", self.numerator(a, b, c));
                }
            }
        }
        s
    }

    pub fn nouts(&self) -> usize {
        self.nouts
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    #[inline]
    pub fn numerator(&self, a: usize, b: usize, c: usize) -> u64 {
        self.numerators[(a * self.nouts + b) * self.nouts + c]
    }

    pub fn prob(&self, a: usize, b: usize, c: usize) -> Ratio<u64> {
        Ratio::new(self.numerator(a, b, c), self.denominator)
    }

    /// Marginal numerators over `types` (sorted, deduplicated) with the
    /// distribution's own denominator `D`, indexed by the outcomes of
    /// `types` in base `nouts`, first type most significant.
    pub fn marginal_numerators(&self, types: &[PartyType]) -> Result<Vec<u64>> {
        let types = normalize_types(types)?;
        let n = self.nouts;
        let mut out = vec![0u64; n.pow(types.len() as u32)];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let abc = [a, b, c];
                    let idx = types.iter().fold(0, |acc, t| acc * n + abc[t.index()]);
                    out[idx] += self.numerator(a, b, c);
                }
            }
        }
        Ok(out)
    }

    /// Exact marginal table over a nonempty subset of `{A, B, C}`, each
    /// entry in lowest terms.
    pub fn marginal(&self, types: &[PartyType]) -> Result<Vec<Ratio<u64>>> {
        Ok(self
            .marginal_numerators(types)?
            .into_iter()
            .map(|x| Ratio::new(x, self.denominator))
            .collect())
    }

    /// `[π(p)](a_0, a_1, a_2) = p(a_{π(0)}, a_{π(1)}, a_{π(2)})`.
    pub fn permute_parties(&self, pi: &Perm) -> Self {
        assert_eq!(pi.len(), 3);
        self.remap(|abc| [abc[pi.apply(0)], abc[pi.apply(1)], abc[pi.apply(2)]])
    }

    /// `[τ(p)](a, b, c) = p(τ⁻¹(a), τ⁻¹(b), τ⁻¹(c))`.
    pub fn permute_outcomes(&self, tau: &Perm) -> Self {
        assert_eq!(tau.len(), self.nouts);
        let inv = tau.inverse();
        self.remap(|abc| abc.map(|x| inv.apply(x)))
    }

    /// Whether `π ∘ τ (p) = p`.
    pub fn is_invariant_under(&self, pi: &Perm, tau: &Perm) -> bool {
        let inv = tau.inverse();
        let n = self.nouts;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let abc = [a, b, c].map(|x| inv.apply(x));
                    let src = [abc[pi.apply(0)], abc[pi.apply(1)], abc[pi.apply(2)]];
                    if self.numerator(src[0], src[1], src[2]) != self.numerator(a, b, c) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn remap(&self, source: impl Fn([usize; 3]) -> [usize; 3]) -> Self {
        let n = self.nouts;
        let mut numerators = vec![0; self.numerators.len()];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let s = source([a, b, c]);
                    numerators[(a * n + b) * n + c] = self.numerator(s[0], s[1], s[2]);
                }
            }
        }
        RationalDistribution { nouts: n, numerators, denominator: self.denominator }
    }
}

fn check_visibility(num: u64, den: u64) -> Result<()> {
    if den == 0 || num > den {
        return Err(Error::InvalidVisibility { num, den });
    }
    Ok(())
}

fn parse_ints(line: &str) -> Option<Vec<u64>> {
    line.split_whitespace().map(|t| t.parse().ok()).collect()
}

pub(crate) fn normalize_types(types: &[PartyType]) -> Result<Vec<PartyType>> {
    let mut types = types.to_vec();
    types.sort();
    types.dedup();
    if types.is_empty() {
        return Err(Error::InvalidDistribution("marginal over an empty party set".into()));
    }
    Ok(types)
}

enum Pattern {
    AllEqual,
    AllDistinct,
    Other,
}

fn classify(a: usize, b: usize, c: usize) -> Pattern {
    if a == b && b == c {
        Pattern::AllEqual
    } else if a != b && b != c && a != c {
        Pattern::AllDistinct
    } else {
        Pattern::Other
    }
}
