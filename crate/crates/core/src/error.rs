use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs} vs {rhs}")]
    DimensionMismatch {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// Evaluation outside the model's domain (e.g. nonpositive mass).
    #[error("model domain error: {0}")]
    Domain(String),

    /// Jacobian requested at a point where the model is not differentiable.
    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("propagation diverged on interval {interval}")]
    Diverged { interval: usize },

    #[error("interval {interval}: {source}")]
    OnInterval {
        interval: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("solver diverged at iteration {iteration}")]
    SolverDiverged { iteration: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: `{key}` {reason}")]
    Validation { key: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dims(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            op,
            lhs: format!("{}x{}", lhs.0, lhs.1),
            rhs: format!("{}x{}", rhs.0, rhs.1),
        }
    }

    pub(crate) fn on_interval(self, interval: usize) -> Self {
        match self {
            e @ (Error::Diverged { .. } | Error::OnInterval { .. }) => e,
            e => Error::OnInterval {
                interval,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
