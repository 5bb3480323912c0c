use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    MonteCarlo,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("invalid modulation: {0}")]
    InvalidModulation(String),

    #[error("invalid branch: {0}")]
    InvalidBranch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "delay {tau:e} s pushes the pulse train outside the observation window [0, {window:e}] s"
    )]
    WindowClipped { tau: f64, window: f64 },

    #[error("sampled signal has no derivative samples")]
    MissingDerivative,

    #[error("sampled signal is empty")]
    EmptySignal,

    #[error("signal energy is not positive")]
    ZeroEnergy,

    #[error("branch {branch}: channel weight gamma = {gamma:e} must be positive")]
    NonPositiveGamma { branch: usize, gamma: f64 },

    #[error("branch {branch}: time-moment matrix is degenerate (E*F - F_hat^2 = {gap:e})")]
    SingularGeometry { branch: usize, gap: f64 },

    #[error("delay information is not positive ({0:e})")]
    NonPositiveInformation(f64),

    #[error(
        "Fisher information matrix is numerically singular (condition estimate {condition:e})"
    )]
    SingularFim { condition: f64 },

    #[error("{hits} of {trials} trials put the delay estimate on the search-grid boundary")]
    BoundaryHits { hits: usize, trials: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("branch {index}: {source}")]
    Branch {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_branch(self, index: usize) -> Self {
        Error::Branch {
            index,
            source: Box::new(self),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidPulse(_)
            | Error::InvalidModulation(_)
            | Error::InvalidBranch(_)
            | Error::InvalidGrid(_)
            | Error::WindowClipped { .. }
            | Error::Config(_) => ErrorCategory::Config,
            Error::BoundaryHits { .. } => ErrorCategory::MonteCarlo,
            Error::Branch { source, .. } => source.category(),
            _ => ErrorCategory::Numerical,
        }
    }
}
