use thiserror::Error;

/// Errors raised by parsing, evaluation and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("matrix `{name}` is not symmetric (max |M - M^T| = {asymmetry:e})")]
    NonSymmetric { name: String, asymmetry: f64 },

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: String, value: f64 },

    #[error("model has no log-sum-exp and no quartic terms")]
    EmptyModel,

    #[error("non-finite entry in `{name}`")]
    NonFinite { name: String },

    #[error("G_a is singular (smallest |eigenvalue| = {min_abs_eig:e})")]
    SingularGa { min_abs_eig: f64 },

    #[error("dual point outside the domain: {0}")]
    Domain(String),

    #[error("no critical point of the dual in the positive definite region: {0}")]
    NoSaPlusCriticalPoint(String),

    #[error("point is not critical (|grad|_inf = {residual:e})")]
    NotCritical { residual: f64 },

    #[error("sigma = {sigma} lies on a pole of the secular function")]
    Pole { sigma: f64 },

    #[error("existence condition fails: no dual critical point in the positive definite region")]
    NotExists,

    #[error("objective is unbounded below (smallest eigenvalue {lambda_min} <= -1)")]
    Unbounded { lambda_min: f64 },

    #[error("A2 - A1 is not positive definite (smallest eigenvalue {lambda_min:e})")]
    NotPd { lambda_min: f64 },

    #[error("dimension {n} is too large for the grid oracle (max 3)")]
    DimensionTooLarge { n: usize },

    #[error("instance matches neither the quartic nor the minimax specialization")]
    ShapeMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
