use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation guard violated: {0}")]
    Truncation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state invariant violated: {0}")]
    InvalidState(String),

    #[error("time {t:e} s lies outside the interaction window [{start:e}, {end:e}]")]
    OutOfWindow { t: f64, start: f64, end: f64 },

    #[error("dispersive phase requires a non-zero detuning")]
    ZeroDetuning,

    #[error("integration did not converge: {0}")]
    Convergence(String),

    #[error("sample {sample}: {source}")]
    AtSample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that stem from numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Truncation(_)
            | Error::InvalidState(_)
            | Error::Convergence(_)
            | Error::ZeroDetuning => true,
            Error::AtSample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_sample(self, sample: usize) -> Error {
        match self {
            e @ Error::AtSample { .. } => e,
            e => Error::AtSample {
                sample,
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
