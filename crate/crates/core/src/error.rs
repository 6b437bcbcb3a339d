use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("column {index} has zero norm")]
    DegenerateColumn { index: usize },

    #[error("matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("column {column} is not unit norm (norm = {norm})")]
    NotNormalized { column: usize, norm: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid pulse selection: {0}")]
    InvalidPulses(String),

    #[error("SNR is undefined for an all-zero signal")]
    UndefinedSnr,

    #[error("blocks are not shift structured: {0}")]
    NotShiftStructured(String),

    #[error("trial results come from different experiment configurations")]
    ConfigMismatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
