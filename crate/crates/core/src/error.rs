use thiserror::Error;

/// Errors raised by the simulator, the learning stack and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("action vector has length {got}, expected {expected}")]
    ActionLength { expected: usize, got: usize },

    #[error("episode already terminated after {0} steps")]
    EpisodeTerminated(usize),

    #[error("reward kind {0} needs probe measurements but none were supplied")]
    MissingMeasurements(&'static str),

    #[error("brute force needs {configs} evaluations, above the cap of {cap}")]
    SearchCapExceeded { configs: u128, cap: u128 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("output directory {path} is not writable: {source}")]
    OutputDir {
        path: String,
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ActionLength { .. } => "action_length",
            Error::EpisodeTerminated(_) => "episode_terminated",
            Error::MissingMeasurements(_) => "missing_measurements",
            Error::SearchCapExceeded { .. } => "search_cap_exceeded",
            Error::EmptySamples => "empty_samples",
            Error::Checkpoint(_) => "checkpoint",
            Error::OutputDir { .. } => "output_dir",
            Error::Io(_) => "io",
            Error::Json(_) => "config_parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
