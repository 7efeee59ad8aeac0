//! Incompatibility certificates: integer vectors with a strictly positive
//! inner product against every exact vertex of a reduced problem.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::IntVec;
use crate::problem::ReducedProblem;

pub const FORMAT_VERSION: u32 = 1;

/// Version of the coordinate layout and block scaling of exact vertices.
pub const LAYOUT_VERSION: u32 = 1;

/// Everything the exact vertices depend on, in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDescription {
    pub size: String,
    pub nouts: usize,
    pub denominator: String,
    pub numerators: Vec<String>,
    pub constraints: Vec<String>,
    pub group_order: usize,
    pub stabilizer_orders: Vec<usize>,
    pub n_vars: usize,
    pub n_cons: usize,
    pub layout_version: u32,
}

impl ProblemDescription {
    pub fn of(prob: &ReducedProblem) -> Self {
        let target = prob.target();
        ProblemDescription {
            size: prob.graph().size().to_string(),
            nouts: target.nouts(),
            denominator: target.denominator().to_string(),
            numerators: target.numerators().iter().map(u64::to_string).collect(),
            constraints: prob
                .space()
                .blocks()
                .iter()
                .map(|b| b.orbit.representative.display(prob.graph()))
                .collect(),
            group_order: prob.group().order(),
            stabilizer_orders: prob.space().blocks().iter().map(|b| b.orbit.stabilizer.order()).collect(),
            n_vars: prob.n_vars(),
            n_cons: prob.n_cons(),
            layout_version: LAYOUT_VERSION,
        }
    }

    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("description serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// SHA-256 digest of the problem's canonical description.
pub fn fingerprint(prob: &ReducedProblem) -> String {
    ProblemDescription::of(prob).fingerprint()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Producer {
    pub name: String,
    pub version: String,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub format_version: u32,
    pub fingerprint: String,
    pub problem: ProblemDescription,
    pub scale_n: String,
    pub w_int: Vec<String>,
    pub producer: Producer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// The first representative (by position) whose inner product is not
    /// positive.
    Invalid { position: usize, event_index: u64, value: BigInt },
    FingerprintMismatch { expected: String, found: String },
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Valid => 0,
            Verdict::Invalid { .. } => 1,
            Verdict::FingerprintMismatch { .. } => 2,
        }
    }
}

impl Certificate {
    pub fn new(prob: &ReducedProblem, w: &IntVec, scale_n: u64, iterations: usize) -> Self {
        let problem = ProblemDescription::of(prob);
        Certificate {
            format_version: FORMAT_VERSION,
            fingerprint: problem.fingerprint(),
            problem,
            scale_n: scale_n.to_string(),
            w_int: w.to_strings(),
            producer: Producer {
                name: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                iterations,
            },
        }
    }

    pub fn w(&self) -> Result<IntVec> {
        let values = self
            .w_int
            .iter()
            .map(|s| s.parse::<BigInt>().map_err(|_| Error::Certificate(format!("not an integer: {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntVec::from_big(values))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cert: Certificate = serde_json::from_str(text)?;
        if cert.format_version != FORMAT_VERSION {
            return Err(Error::Certificate(format!("unsupported format version {}", cert.format_version)));
        }
        Ok(cert)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Checks the certificate against every representative with exact
/// integer arithmetic.
pub fn verify(cert: &Certificate, prob: &ReducedProblem) -> Result<Verdict> {
    let expected = fingerprint(prob);
    if cert.fingerprint != expected || cert.problem.fingerprint() != cert.fingerprint {
        return Ok(Verdict::FingerprintMismatch { expected, found: cert.fingerprint.clone() });
    }
    let w = cert.w()?;
    if w.len() != prob.n_cons() {
        return Err(Error::Certificate(format!("expected {} coordinates, found {}", prob.n_cons(), w.len())));
    }
    Ok(check_vector(&w, prob))
}

/// Validity of `w` as a certificate, ignoring fingerprints.
pub fn check_vector(w: &IntVec, prob: &ReducedProblem) -> Verdict {
    let products = prob.inner_products(w);
    match products.iter().position(|x| !x.is_positive()) {
        None => Verdict::Valid,
        Some(i) => Verdict::Invalid {
            position: i,
            event_index: prob.representatives()[i],
            value: products[i].clone(),
        },
    }
}
