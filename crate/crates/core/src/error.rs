use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid homeomorphism: {0}")]
    InvalidHomeomorphism(String),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The transfer-operator power iteration ran out of iterations.
    #[error("stationary solver did not converge after {iterations} iterations (last step {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A measure-induced metric was requested from an atomic or gappy measure.
    #[error("metric is degenerate: {0}")]
    MetricDegenerate(String),

    /// Low-defect distances that fit no `{0, 1/k, ..}` lattice.
    #[error("preserved distances fit no lattice with k <= {k_max}; offending s = {offending:?}")]
    StructureMismatch { k_max: u32, offending: Vec<f64> },

    #[error("distance 1/{k} is not preserved (defect {defect:e} >= tol {tol:e})")]
    NotEquivariant { k: u32, defect: f64, tol: f64 },

    #[error("conjugation is degenerate: {0}")]
    DegenerateConjugation(String),

    #[error("classification inconclusive: {0}")]
    Inconclusive(Box<Error>),

    #[error("no interval contraction at horizon {horizon} (smallest image length {min_length:e})")]
    NoContraction { horizon: usize, min_length: f64 },

    #[error("expected {expected} fiber clusters, found {found}")]
    ClusterCountMismatch { expected: usize, found: usize },

    #[error("invalid fiber sampler: {0}")]
    InvalidSampler(String),

    #[error("too many failed fibers: {failed} of {total}")]
    TooManyFailedFibers { failed: usize, total: usize },
}

impl Error {
    /// Stable identifier used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidHomeomorphism(_) => "InvalidHomeomorphism",
            Error::InvalidProbabilities(_) => "InvalidProbabilities",
            Error::InvalidMeasure(_) => "InvalidMeasure",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::MetricDegenerate(_) => "MetricDegenerate",
            Error::StructureMismatch { .. } => "StructureMismatch",
            Error::NotEquivariant { .. } => "NotEquivariant",
            Error::DegenerateConjugation(_) => "DegenerateConjugation",
            Error::Inconclusive(_) => "Inconclusive",
            Error::NoContraction { .. } => "NoContraction",
            Error::ClusterCountMismatch { .. } => "ClusterCountMismatch",
            Error::InvalidSampler(_) => "InvalidSampler",
            Error::TooManyFailedFibers { .. } => "TooManyFailedFibers",
        }
    }

    /// Errors that report a documented analysis outcome rather than bad input.
    pub fn is_analysis_outcome(&self) -> bool {
        !matches!(
            self,
            Error::InvalidHomeomorphism(_)
                | Error::InvalidProbabilities(_)
                | Error::InvalidMeasure(_)
                | Error::InvalidArgument(_)
        )
    }
}
