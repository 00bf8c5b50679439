use thiserror::Error;

/// Errors raised by the click-counting library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or index is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A truncated Fock representation captures too little of the state.
    #[error("cutoff {cutoff} too small: it keeps {captured:.12} of the trace, more than {tail_tol:.1e} is lost")]
    CutoffTooSmall { cutoff: usize, captured: f64, tail_tol: f64 },

    /// Operands are truncated at incompatible dimensions.
    #[error("cutoff mismatch: {0} vs {1}")]
    CutoffMismatch(usize, usize),

    /// The output would contain delta-shaped (singular) P-function terms.
    #[error("singular output: {0}")]
    Singular(String),

    /// Requested quantity is not implemented for these arguments.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by numerical truncation rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::CutoffTooSmall { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
