use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate in vector")]
    NonFinite,

    #[error("probability {0} lies outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("invalid convex weights: {0}")]
    InvalidWeights(String),

    #[error("point is not a state of the space: {0}")]
    NotInStateSpace(String),

    #[error("mixture leaves the enumerated state set of a non-convex theory")]
    NonConvexClosure,

    #[error("invalid effect: {0}")]
    InvalidEffect(String),

    #[error("invalid measurement `{label}`: {reason}")]
    InvalidMeasurement { label: String, reason: String },

    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("unknown measurement `{0}`")]
    UnknownMeasurement(String),

    #[error("unknown Alice setting `{0}`")]
    UnknownSetting(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("pairing does not cover Bob setting `{0}`")]
    MissingPairing(String),

    #[error("no-signaling violated: {0}")]
    Signaling(String),

    #[error("parameter `{name}` = {value} is out of range ({range})")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("correlation shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("marginal mismatch of {0:e} between joint tables")]
    MarginalMismatch(f64),

    #[error("zero marginal with nonzero numerator at {0:?}")]
    ZeroMarginal(Vec<usize>),

    #[error("empty state list")]
    EmptyStateList,

    #[error("inconsistent linear system: {0}")]
    Inconsistent(String),

    #[error("state does not belong to the theory: {0}")]
    TheoryMismatch(String),

    #[error("linear program solver failure: {0}")]
    Solver(String),
}
