use thiserror::Error;

/// Errors produced by the RIS simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient pilots: {0}")]
    InsufficientPilots(String),

    #[error("empty signal subspace")]
    EmptySubspace,

    #[error("finite-difference oracle: {0}")]
    Oracle(String),

    #[error("AO monotonicity violated at outer iteration {iteration}: {previous} -> {current}")]
    NonMonotone {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors that mark an estimator as not applicable at a sweep point
    /// rather than aborting the sweep.
    pub fn is_not_applicable(&self) -> bool {
        matches!(
            self,
            Error::InsufficientPilots(_) | Error::Numerical(_) | Error::EmptySubspace
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
