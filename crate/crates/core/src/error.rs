use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A numerical precondition of an operation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Bistatic coordinate conversion produced no valid point.
    #[error("geometric inconsistency: {0}")]
    Geometry(String),

    #[error("rank-deficient channel: rows {rows:?} are linearly dependent on the others")]
    RankDeficient { rows: Vec<usize> },

    #[error("MUSIC spectrum has no distinguishable peak (max/median = {ratio:.3})")]
    NoPeak { ratio: f64 },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("unknown command `{0}`")]
    UnknownCommand(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("output error: {0}")]
    Output(String),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-friendly tag used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Contract(_) => "contract",
            Error::InvalidArgument { .. } => "invalid_argument",
            Error::Unsupported(_) => "unsupported",
            Error::Geometry(_) => "geometry",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NoPeak { .. } => "no_peak",
            Error::Config { .. } => "config",
            Error::UnknownCommand(_) => "unknown_command",
            Error::Io(_) => "io",
            Error::Output(_) => "output",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
