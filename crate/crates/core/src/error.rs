use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A mathematical operation left its domain (division by zero and the like).
    #[error("domain error: {0}")]
    Domain(String),

    /// A GAM fit could not be formed from the supplied data.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A gradient contained NaN or infinity.
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    /// A loss or forward value became NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A finite-difference oracle blew up or could not be resolved.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
