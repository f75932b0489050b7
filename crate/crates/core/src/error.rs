use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EloError {
    #[error("vertex {index} out of range for {n} players")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("a player cannot play against themselves (vertex {0})")]
    SamePlayer(usize),
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("negative weight {weight} on edge {edge:?}")]
    NegativeWeight { edge: (usize, usize), weight: f64 },
    #[error("non-finite value at coordinate {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    EigenFailure { sweeps: usize },
    #[error("spectral gap is zero")]
    ZeroGap,
    #[error("true skill {value} at {index} exceeds cap {cap}")]
    SkillsExceedCap { index: usize, value: f64, cap: f64 },
    #[error("sampled edge set is not a matching (vertex {0} repeated)")]
    NotAMatching(usize),
    #[error("the unbiasedness identity requires an uncapped chain")]
    CapMustBeInfinite,
    #[error("comparison graph is disconnected")]
    Disconnected,
    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("no perfect matching on the positive support")]
    NoPerfectMatching,
    #[error("vertex {vertex} carries load {load} > 1")]
    VertexOverload { vertex: usize, load: f64 },
    #[error("edge {0:?} is not in the comparison graph")]
    EdgeNotInGraph((usize, usize)),
    #[error("invalid bridge count k={k} for clique size {clique_size}")]
    InvalidK { k: usize, clique_size: usize },
    #[error("could not sample skills within cap {cap} after {attempts} attempts")]
    CapViolation { cap: f64, attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for EloError {
    fn from(e: std::io::Error) -> Self {
        EloError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, EloError>;
