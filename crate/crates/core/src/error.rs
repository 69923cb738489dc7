use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: row {row} has {found} entries, expected {expected}")]
    NonSquare {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state entry {index} = {value} is outside [0, 1]")]
    StateOutOfRange { index: usize, value: f64 },

    #[error("{name} must be positive and finite, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },

    #[error("basic reproduction number must be positive, got {0}")]
    NonPositiveR0(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no strongly connected placement found after {attempts} attempts")]
    ConnectivityFailure { attempts: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("matrix is reducible")]
    Reducible,

    #[error("iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("spectral radius {rho} exceeds one; no diagonal Lyapunov certificate exists")]
    SpectralRadiusExceedsOne { rho: f64 },

    #[error(
        "Lyapunov search exhausted after {evaluations} evaluations (best margin {best_margin})"
    )]
    SearchExhausted {
        evaluations: usize,
        best_margin: f64,
    },

    #[error("trial {trial} failed: {source}")]
    TrialFailed {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}
