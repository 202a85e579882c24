use thiserror::Error;

use crate::cone::{Classification, ConeCertificate};
use crate::solver::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not Hermitian (max |A - A†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid conic program: {0}")]
    InvalidProgram(String),

    #[error("solver stopped with status {status:?} (primal residual {primal:.3e}, dual residual {dual:.3e}, gap {gap:.3e})")]
    Solver {
        status: SolveStatus,
        primal: f64,
        dual: f64,
        gap: f64,
    },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("lemma violated: nonzero decomposable operator with trace {trace:.3e}")]
    TracePositivity { trace: f64 },

    #[error("witness {index} is {classification:?}, not a DEW")]
    NotDew {
        index: usize,
        classification: Classification,
        certificate: Box<ConeCertificate>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
