use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failure modes shared by every solver and generator in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Cholesky pivot was not strictly positive.
    NotPositiveDefinite,
    DimensionMismatch { expected: usize, found: usize },
    /// Entries differ from their transpose by more than rounding noise.
    NotSymmetric { row: usize, col: usize },
    NonFinite,
    /// Cardinality outside the admissible range `[min, max]`.
    InvalidK { k: usize, min: usize, max: usize },
    NonConvergence { iterations: usize },
    /// No penalty weight above the floor kept `S - eta V` positive definite.
    EtaUnderflow { eta: f64 },
    InvalidEdgeCount { requested: usize, max: usize },
    GenerationFailed { attempts: usize },
    ShrinkageFailed,
    InvalidFolds { folds: usize, n: usize },
    InvalidParameter(&'static str),
}

impl Error {
    /// Stable identifier used on diagnostic streams.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::NonFinite => "NonFinite",
            Error::InvalidK { .. } => "InvalidK",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::EtaUnderflow { .. } => "EtaUnderflow",
            Error::InvalidEdgeCount { .. } => "InvalidEdgeCount",
            Error::GenerationFailed { .. } => "GenerationFailed",
            Error::ShrinkageFailed => "ShrinkageFailed",
            Error::InvalidFolds { .. } => "InvalidFolds",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }

    /// True for errors caused by bad arguments rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NotSymmetric { .. }
                | Error::NonFinite
                | Error::InvalidK { .. }
                | Error::InvalidEdgeCount { .. }
                | Error::InvalidFolds { .. }
                | Error::InvalidParameter(_)
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotSymmetric { row, col } => {
                write!(f, "matrix is not symmetric at ({row}, {col})")
            }
            Error::NonFinite => write!(f, "matrix contains NaN or infinite entries"),
            Error::InvalidK { k, min, max } => {
                write!(f, "cardinality k = {k} outside [{min}, {max}]")
            }
            Error::NonConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::EtaUnderflow { eta } => {
                write!(f, "penalty weight fell to {eta:e} without reaching positive definiteness")
            }
            Error::InvalidEdgeCount { requested, max } => {
                write!(f, "edge count {requested} exceeds the maximum {max}")
            }
            Error::GenerationFailed { attempts } => {
                write!(f, "no positive definite pattern after {attempts} attempts")
            }
            Error::ShrinkageFailed => write!(f, "covariance shrinkage could not reach positive definiteness"),
            Error::InvalidFolds { folds, n } => {
                write!(f, "cannot split {n} samples into {folds} folds")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

impl core::error::Error for Error {}
