use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum EitError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("meshing failure: {0}")]
    Meshing(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("rank deficiency: {message}")]
    Rank {
        message: String,
        /// Column indices (or singular value positions) that were found deficient.
        columns: Vec<usize>,
    },

    #[error("conditioning failure: {message} (epsilon = {epsilon:e}, T = {smoothing:e})")]
    Conditioning {
        message: String,
        epsilon: f64,
        smoothing: f64,
    },

    #[error("degenerate noise reference: {0}")]
    DegenerateNoise(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EitError {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EitError::Meshing(_)
                | EitError::Singular(_)
                | EitError::Rank { .. }
                | EitError::Conditioning { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, EitError>;
