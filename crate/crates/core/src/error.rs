use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every generator was mapped to the origin; the image is the degenerate cone {0}.
    #[error("degenerate cone: {0}")]
    DegenerateCone(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is rank deficient (rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("{solver} exceeded its iteration cap of {limit}")]
    IterationLimit { solver: &'static str, limit: usize },

    #[error("integer overflow: {0}")]
    Overflow(String),

    /// Too many probability-zero degeneracies were observed in a Monte Carlo run.
    #[error("{degenerate} of {samples} samples were degenerate ({what})")]
    DegenerateSamples {
        what: &'static str,
        degenerate: u64,
        samples: u64,
    },
}

impl Error {
    /// Failures of the numerical machinery, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::IterationLimit { .. } | Error::DegenerateSamples { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
