use thiserror::Error;

/// Errors raised by the factorization kernels, solvers and certificates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymNmfError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("factorization failed: non-positive pivot {pivot:e} at index {index}")]
    Singular { index: usize, pivot: f64 },

    #[error("non-finite value encountered in {context}")]
    Numerical { context: String },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("divergence at iteration {iter} with step size {step:e}: objective {objective:e} exceeds limit")]
    Divergence { iter: usize, step: f64, objective: f64 },
}

pub type Result<T> = std::result::Result<T, SymNmfError>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> SymNmfError {
    SymNmfError::Shape {
        op,
        detail: detail.into(),
    }
}
