use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A cost oracle returned NaN or an infinity.
    #[error("non-finite cost {value} reported by player {player}")]
    Evaluation { player: usize, value: f64 },

    /// The learner produced a non-finite value at iteration `t`.
    #[error("numeric failure at t = {t}: {detail}")]
    Numeric { t: u64, detail: String },

    /// A run inside an ensemble failed.
    #[error("run {run} failed: {source}")]
    Run { run: u64, source: Box<Error> },
}

impl Error {
    /// True for failures caused by non-finite numbers during evaluation or
    /// learning, as opposed to bad inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Evaluation { .. } | Error::Numeric { .. } => true,
            Error::Run { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn unsupported(msg: impl Into<String>) -> Error {
    Error::Unsupported(msg.into())
}
