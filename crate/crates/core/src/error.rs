use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid level {0}: levels are numbered from 1")]
    InvalidLevel(i64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("need at least 2 samples for a variance, got {0}")]
    InsufficientSamples(usize),

    #[error("multilevel terms must cover 1..={expected} exactly once: {detail}")]
    BadTerms { expected: usize, detail: String },

    #[error("no refinement gain: alpha = 0 makes the level-count formula singular")]
    NoRefinementGain,

    #[error("unsupported ladder: refinement factor {refinement} / dof exponent {exponent} (only 2 / 3 are supported)")]
    UnsupportedLadder { refinement: f64, exponent: f64 },

    #[error("level count exceeds the scan cap of {0}")]
    LevelCapExceeded(u32),

    #[error("plan needs {needed} levels but the model provides {available}")]
    TooManyLevels { needed: usize, available: u32 },

    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("model failed at level {level}, seed {seed:#018x}: {message}")]
    ModelFailure { level: u32, seed: u64, message: String },
}
