use thiserror::Error;

/// Errors raised by the numerical core, the simulator and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mixture has zero total weight")]
    ZeroWeight,

    #[error("likelihood {0} is degenerate: every label has zero weight")]
    DegenerateLikelihood(usize),

    #[error("range-bearing is undefined for coincident points")]
    CoincidentPoints,

    #[error("communication graph is disconnected{}", match .step { Some(t) => format!(" at step {t}"), None => String::new() })]
    DisconnectedGraph { step: Option<usize> },

    #[error("clutter density is zero")]
    ZeroClutterDensity,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
