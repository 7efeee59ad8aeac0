use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid inflation size: {0}")]
    InvalidSize(String),
    #[error("unknown party {0:?}")]
    UnknownParty(String),
    #[error("invalid number of outcomes per party: {0}")]
    InvalidOutcomeCount(usize),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("event index space nouts^len = {nouts}^{len} does not fit in 64 bits")]
    IndexOverflow { nouts: usize, len: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid visibility {num}/{den}")]
    InvalidVisibility { num: u64, den: u64 },
    #[error("symmetry not admissible: {0}")]
    InadmissibleSymmetry(String),
    #[error("group action does not close on the event family: {0}")]
    NotClosed(String),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("constraint file: {0}")]
    ConstraintSyntax(String),
    #[error("event family with {0} events exceeds the enumeration budget")]
    TooLarge(u64),
    #[error("degenerate active set: {0}")]
    Degenerate(String),
    #[error("certificate: {0}")]
    Certificate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
