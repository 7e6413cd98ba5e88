use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FomError {
    /// A parameter, data point or probability lies outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or adaptive method did not reach its tolerance.
    #[error("convergence failure: {message} (best estimate {best})")]
    Convergence { message: String, best: f64 },

    /// A numeric routine produced non-finite or otherwise unusable values.
    #[error("data error: {0}")]
    Data(String),

    /// Invalid or inconsistent configuration.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl FomError {
    pub fn domain(msg: impl Into<String>) -> Self {
        FomError::Domain(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        FomError::Data(msg.into())
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        FomError::Config {
            key: key.into(),
            message: msg.into(),
        }
    }

    pub fn convergence(msg: impl Into<String>, best: f64) -> Self {
        FomError::Convergence {
            message: msg.into(),
            best,
        }
    }
}

pub type Result<T> = std::result::Result<T, FomError>;
