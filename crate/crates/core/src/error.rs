use thiserror::Error;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("block index {index} out of range for {n_blocks} blocks")]
    IndexOutOfRange { index: usize, n_blocks: usize },

    #[error("duplicate block index {0} in ordered index set")]
    DuplicateIndex(usize),

    #[error("not a permutation of {n} blocks: {detail}")]
    NotAPermutation { n: usize, detail: String },

    #[error("invalid block scaling: {0}")]
    InvalidScaling(String),

    #[error("matrix is singular or numerically rank deficient (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigenvalue iteration did not converge")]
    EigenFailure,

    #[error("Lyapunov equation has no unique solution (eigenvalues pair to zero)")]
    NoUniqueSolution,

    #[error("matrix is not stabilized by this scaling (spectral abscissa {abscissa:e})")]
    NotStabilized { abscissa: f64 },

    #[error("plant state matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    UnstablePlant { abscissa: f64 },

    #[error(
        "configuration {sigma:?} rejected: -G_uu K is not Hurwitz (spectral abscissa {abscissa:e})"
    )]
    ConfigurationRejected { sigma: Vec<usize>, abscissa: f64 },

    #[error("no M estimate supplied for loop set {sigma:?}; run the robustness probe first")]
    MissingMEstimate { sigma: Vec<usize> },

    #[error("too many loops ({0}); configuration enumeration is limited to 12")]
    TooManyLoops(usize),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sufficient condition {condition} fired but sampling found a destabilizing scaling")]
    Discrepancy { condition: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
