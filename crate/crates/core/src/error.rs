use thiserror::Error;

/// Errors surfaced by the library. Each variant maps onto a CLI exit code.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parameter b = {0} must satisfy 0 < b < 1/4")]
    ParameterOutOfRange(String),
    #[error("invalid rational literal `{0}`")]
    BadRational(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("set {0} is not a member of family {1}")]
    NotAMember(String, String),
    #[error("level {requested} is not built (state has {built} levels)")]
    LevelNotBuilt { requested: usize, built: usize },
    #[error("coordinate {0} is not built")]
    CoordinateNotBuilt(u64),
    #[error("functional at level {level}, index {index} is not registered")]
    UnknownFunctional { level: usize, index: usize },
    #[error("no linked pairs at level {0}; nothing to register")]
    NoLinkedPairs(usize),
    #[error("coordinate budget exceeded: next level would end at {needed}, cap is {cap}")]
    CoordinateBudget { needed: u64, cap: u64 },
    #[error("coordinate {0} carries no composite functional")]
    NoComposite(u64),
    #[error("expected a composite functional, got a unit vector")]
    NotComposite,
    #[error("coefficient {0} is not a power of b")]
    CoefficientOutsideRange(String),
    #[error("malformed state document: {0}")]
    MalformedDocument(String),
    #[error("unsupported state document version {0}")]
    SchemaVersion(u64),
    #[error("insufficient levels: {0}")]
    InsufficientLevels(String),
    #[error("no designated coordinates: {0}")]
    NoDesignated(String),
    #[error("blocks are not successive: block {0} starts before block {1} ends")]
    NotSuccessive(usize, usize),
    #[error("bracket width {width} exceeds epsilon {epsilon} at depth {depth}")]
    EpsilonNotReached { width: String, epsilon: String, depth: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
