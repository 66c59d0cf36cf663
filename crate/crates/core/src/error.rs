use thiserror::Error;

/// Errors produced across the homogenization pipeline.
///
/// Variants are split so the CLI can map them onto exit codes: everything
/// that is a malformed input is a validation error, the rest are solver
/// failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank-deficient projection input: column {column} is dependent on the previous ones")]
    RankDeficient { column: usize },

    #[error("invalid projection shape: need m > n >= 1, got m = {m}, n = {n}")]
    ProjectionShape { m: usize, n: usize },

    #[error("columns deviate from orthonormality by {deviation:.3e} (> 1e-6); use the normalizing constructor")]
    NotOrthonormal { deviation: f64 },

    #[error("unknown catalogue matrix `{0}`")]
    UnknownMatrix(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("singular flux evaluation at xi = 0 for unregularized p = {p} < 2")]
    SingularFlux { p: f64 },

    #[error("model family has no potential")]
    NoPotential,

    #[error("expression error: {0}")]
    Expression(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("criterion fails inside the bandlimit ball at k = {k:?}; the cell system is singular")]
    CriterionFailure { k: Vec<i64> },

    #[error("cell solver did not converge in {iterations} iterations (last dual residual {last_residual:.3e})")]
    CellNonConvergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("mesh under-resolves the oscillation: need at least {required} elements per axis, got {actual}")]
    UnderResolved { required: usize, actual: usize },

    #[error("Newton stagnated after {iterations} iterations (dual residual {last_residual:.3e})")]
    NewtonStagnation {
        iterations: usize,
        last_residual: f64,
        step_history: Vec<f64>,
    },

    #[error("mismatched domains: {0}")]
    MismatchedDomains(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative solver, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::CellNonConvergence { .. }
                | Error::NewtonStagnation { .. }
                | Error::CriterionFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
