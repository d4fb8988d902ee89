use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its allowed range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Operand dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A divisibility or integrality requirement of a construction failed.
    #[error("divisibility: {0}")]
    Divisibility(String),

    /// Parameters fall outside the regime where a closed form holds.
    /// The message names the violated condition, e.g. "requires c >= beta".
    #[error("out of regime: {0}")]
    Regime(String),

    /// The plan does not have the structure an algorithm relies on.
    #[error("unsupported plan: {0}")]
    UnsupportedPlan(String),

    /// An enumeration would exceed its configured budget.
    #[error("enumeration budget exceeded: {needed} > {budget}")]
    Budget { needed: u128, budget: u128 },

    #[error("decode failure: kappa = {kappa:e}, relative residual = {residual:e}")]
    DecodeFailure { kappa: f64, residual: f64 },

    #[error("analytic/oracle mismatch: {0}")]
    Mismatch(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Regime(_) | Error::Divisibility(_) | Error::Parameter(_) => 2,
            Error::Mismatch(_) => 3,
            Error::DecodeFailure { .. } => 4,
            Error::Budget { .. } => 5,
            _ => 1,
        }
    }
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn divisibility(msg: impl Into<String>) -> Error {
    Error::Divisibility(msg.into())
}

pub(crate) fn regime(msg: impl Into<String>) -> Error {
    Error::Regime(msg.into())
}
