use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("input contains no events")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {0} lies outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("self-pair ({0}, {0}) has no rate")]
    SelfPair(usize),

    #[error("closed-form cumulative rate requires the euclidean-distance model")]
    UnsupportedRateKind,

    #[error("non-finite {term} at epoch {epoch}: {value}")]
    NonFinite {
        epoch: usize,
        term: &'static str,
        value: f64,
    },

    #[error("at least one positive and one negative instance are required")]
    SingleClass,

    #[error("regression needs at least two distinct interaction counts")]
    DegenerateDesign,

    #[error("malformed model file: {0}")]
    Model(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
