use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {k} out of range for degree {n} (expected 0 <= k <= {max})", max = .n - 1)]
    IndexOutOfRange { k: usize, n: usize },

    #[error("near-singular boundary: |f'| = {modulus:.3e} at theta = {theta:.6}")]
    NearSingularBoundary { theta: f64, modulus: f64 },

    #[error("breakdown at t = {t}: {reason}")]
    Breakdown { t: f64, reason: String },

    #[error("step size underflow at t = {t} (h = {step:.3e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("newton iteration diverged at t = {t} (last good t = {last_good_t}, residual {residual:.3e})")]
    NewtonDivergence { t: f64, last_good_t: f64, residual: f64 },

    #[error("singular jacobian at t = {t} (condition {condition:.3e})")]
    SingularJacobian { t: f64, condition: f64 },

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for FlowError {
    fn from(e: std::io::Error) -> Self {
        FlowError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FlowError {
    fn from(e: serde_json::Error) -> Self {
        FlowError::Parse(e.to_string())
    }
}

impl From<csv::Error> for FlowError {
    fn from(e: csv::Error) -> Self {
        FlowError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlowError>;
