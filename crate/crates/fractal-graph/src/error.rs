use thiserror::Error;

/// Errors raised by the geometric pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource cap exceeded: {what} needs {requested}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        requested: f64,
        cap: f64,
    },

    #[error("piece {index} at level {level} has zero width along the frame axis")]
    VerticalPiece { level: usize, index: usize },

    #[error("pieces {left} and {right} at level {level} overlap along the frame axis")]
    OverlappingPieces {
        level: usize,
        left: usize,
        right: usize,
    },

    #[error("abutting pieces at x = {x} disagree in height ({left} vs {right})")]
    Discontinuity { x: f64, left: f64, right: f64 },

    #[error("piece {index} at level {level} is not contained in any piece of the previous level")]
    NotNested { level: usize, index: usize },

    #[error("cauchy estimate violated at level {level}: sup |g_(n+1) - g_n| = {sup} > {bound}")]
    HypothesisInconsistency { level: usize, sup: f64, bound: f64 },

    #[error("no interval survives the length threshold {delta} at angle {theta}")]
    ExtractionFailed { theta: f64, delta: f64 },

    #[error("uniformization failed: {0}")]
    UniformizationFailed(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("no angle reaches the density floor {floor}; best achieved {best}")]
    PersistentAngleNotFound { floor: f64, best: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class: 2 for bad input, 3 for resource caps,
    /// 1 for everything that indicates a failed construction.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Config(_)
            | Error::Toml(_)
            | Error::Unsupported(_)
            | Error::Precondition(_)
            | Error::Io(_) => 2,
            Error::ResourceCap { .. } => 3,
            _ => 1,
        }
    }
}
