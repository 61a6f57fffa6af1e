use std::fmt;

/// Errors raised by the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("transport problem with {atoms} atoms exceeds the solver cap of {cap}")]
    SolverCap { atoms: usize, cap: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid modulus function `{name}`: {reason}")]
    InvalidModulus { name: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model audit failed: {0}")]
    ModelAudit(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("singular diffusion matrix at step {step}")]
    SingularDiffusion { step: usize },

    #[error("covariance matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("trace condition 2ε(1-α) > 1 violated for ε = {epsilon}, α = {alpha}")]
    TraceCondition { epsilon: f64, alpha: f64 },

    #[error("measure flow does not match the simulation grid: {0}")]
    FlowMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn with_context(self, context: impl fmt::Display) -> Self {
        Error::Context {
            context: context.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Io(_) | Error::InvalidArgument(_) => 1,
            Error::NonFinite { .. } | Error::SingularDiffusion { .. } => 3,
            _ => 3,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
