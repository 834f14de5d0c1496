use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed graph or decomposition (endpoint mismatch, bad terminal, ...).
    #[error("structural error: {0}")]
    Structure(String),

    /// The input graph admits no series-parallel parse.
    #[error("graph is not two-terminal series-parallel: {0}")]
    NotSeriesParallel(String),

    /// A DAG was required but the graph contains a directed cycle.
    #[error("graph contains a directed cycle")]
    CycleDetected,

    /// A polynomial operation produced a monomial above the degree cap.
    #[error("degree overflow: monomial {monomial} has degree {degree}, cap is {cap}")]
    DegreeOverflow {
        monomial: String,
        degree: usize,
        cap: usize,
    },

    /// Conditioning was requested on an event of (near-)zero mass.
    #[error("conditioning on a null event: mass {mass:.3e} at {what}")]
    ConditionOnNull { what: String, mass: f64 },

    /// A sampled distribution or moment sequence is inconsistent beyond
    /// tolerance; the pseudo-expectation cannot be rounded.
    #[error("corrupt pseudo-expectation: {0}")]
    CorruptPseudoExpectation(String),

    /// Majorization precondition violated.
    #[error("sequence {a:?} does not majorize {b:?}")]
    NotMajorizing { a: Vec<u32>, b: Vec<u32> },

    /// An enumeration or basis would exceed the configured size limit.
    #[error("instance too large for {what}: {size} exceeds limit {limit}")]
    SizeLimit {
        what: String,
        size: usize,
        limit: usize,
    },

    /// Invalid generator or CLI parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Instance file failed validation.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// Solver-side failure (inconsistent constraints detected at setup).
    #[error("solver error: {0}")]
    Solver(String),

    /// JSON (de)serialization failure.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    /// Filesystem failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
