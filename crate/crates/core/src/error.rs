use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the region where the quantity is defined.
    #[error("domain: {0}")]
    Domain(String),

    /// A quadrature did not reach its tolerance; `achieved` is the error estimate it stopped at.
    #[error("accuracy: {message} (achieved {achieved:e})")]
    Accuracy { message: String, achieved: f64 },

    /// An improper integral kept contributing after the panel budget ran out.
    #[error("convergence: {message} (partial sum {partial:e})")]
    Convergence { message: String, partial: f64 },

    /// A power series did not settle within the allowed number of terms.
    #[error("truncation: series not converged after {terms} terms (partial {partial:e}, last term {last_term:e})")]
    Truncation {
        terms: usize,
        partial: f64,
        last_term: f64,
    },

    #[error("integrability: {0}")]
    Integrability(String),

    /// The descriptor lacks what the operation needs (sampler, sector, half-plane extension).
    #[error("capability: {0}")]
    Capability(String),

    #[error("config: {key}: {message}")]
    Config { key: String, message: String },

    #[error("internal: {0}")]
    Internal(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Short tag used in report columns (`"domain"`, `"convergence"`, ...).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Accuracy { .. } => "accuracy",
            Error::Convergence { .. } => "convergence",
            Error::Truncation { .. } => "truncation",
            Error::Integrability(_) => "integrability",
            Error::Capability(_) => "capability",
            Error::Config { .. } => "config",
            Error::Internal(_) => "internal",
        }
    }
}
