use thiserror::Error;

use crate::femspace::FieldError;
use crate::memory_kernel::KernelError;
use crate::mesh::MeshError;
use crate::sparsela::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error wrapping the per-module failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
