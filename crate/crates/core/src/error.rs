use thiserror::Error;

pub type Result<T> = std::result::Result<T, CfoError>;

#[derive(Debug, Error)]
pub enum CfoError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frequency offset {epsilon} outside the identifiable range (-{half_range}, {half_range})")]
    CfoOutOfRange { epsilon: f64, half_range: f64 },

    /// The correlation diagonal needed by the simplified estimator vanished.
    #[error("degenerate correlation at diagonal index {iota}")]
    DegenerateCorrelation { iota: usize },

    /// `|sum_mu z_mu^iota|` vanishes for this lattice offset set.
    #[error("diagonal index {iota} is degenerate for the configured lattice offsets")]
    DegenerateIota { iota: usize },

    #[error("training matrix has no orthogonal complement energy for this channel")]
    SingularTraining,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
