use std::io;

/// Errors produced by the simulator and its analysis tools.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mobility parameters: {0}")]
    InvalidMobility(String),

    #[error("mobility chain of MS {ms} is not irreducible ({reachable} of {total} positions mutually reachable)")]
    Reducible {
        ms: usize,
        reachable: usize,
        total: usize,
    },

    #[error("power iteration did not converge after {iterations} iterations (last L1 change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("invalid power levels: {0}")]
    InvalidPowerLevels(String),

    #[error("invalid arrival configuration: {0}")]
    InvalidArrivals(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("trace too short: {len} slots, at least {min} required")]
    TraceTooShort { len: usize, min: usize },

    #[error("power vector enumeration would produce about {estimate} vectors (cap {cap})")]
    TooManyVectors { estimate: f64, cap: usize },

    #[error("LP solver failure: {0}")]
    Lp(String),

    #[error("invalid stability instance: {0}")]
    InvalidInstance(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("capacity search precondition violated: rate {rate} expected {expected}, observed {observed}")]
    CapacityPrecondition {
        rate: f64,
        expected: &'static str,
        observed: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed trace CSV: {0}")]
    MalformedTrace(String),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
