use thiserror::Error;

/// Crate-wide error type.
///
/// `InvalidParameter` and the grading/config variants indicate bad inputs;
/// `SingularSystem` and `ResidualCheck` indicate a numerical failure during a
/// run. The CLI maps the former to exit code 2 and the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grading function is not strictly increasing near probe index {index}")]
    NonMonotoneGrading { index: usize },

    #[error("grading function endpoint mismatch: {0}")]
    EndpointMismatch(String),

    #[error("grading function does not carry derivative information")]
    MissingDerivatives,

    #[error("history length {got} does not match the {expected} weights")]
    HistoryLengthMismatch { got: usize, expected: usize },

    #[error("degenerate node: {0}")]
    DegenerateNode(String),

    #[error("singular tridiagonal system: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("solve residual {residual:e} exceeds {allowed:e} at time step {step}")]
    ResidualCheck {
        step: usize,
        residual: f64,
        allowed: f64,
    },
}

impl Error {
    /// True for failures of the numerical process itself, as opposed to bad
    /// inputs or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::ResidualCheck { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
