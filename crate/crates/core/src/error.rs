use thiserror::Error;

/// Errors raised by the evidence estimators and their supporting primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error("non-numeric term in log-domain sum")]
    NonNumeric,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("degenerate weights: no strictly positive weight")]
    DegenerateWeights,
    #[error("no shells accumulated")]
    NoShells,
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("insufficient samples for ISD: need at least 2, got {0}")]
    InsufficientSamples(usize),
    #[error("stratification infeasible in this dimension: {count} strata exceeds cap {cap}")]
    StratificationInfeasible { count: u128, cap: usize },
    #[error("stratum {0} never sampled")]
    StratumNeverSampled(usize),
    #[error("level unreachable: no surviving samples")]
    LevelUnreachable,
    #[error("no model explains the data")]
    NoModelExplainsData,
    #[error("undefined factor: both evidences are zero")]
    UndefinedBayesFactor,
    #[error("oracle not converged: refinement changed the result by {delta:e}")]
    OracleNotConverged { delta: f64 },
    #[error("unknown benchmark '{0}'")]
    UnknownBenchmark(String),
}

pub type Result<T, E = EvidenceError> = std::result::Result<T, E>;
