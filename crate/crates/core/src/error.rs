use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("model blow-up: non-finite state on level {level} at Euler step {step}")]
    ModelBlowUp { level: usize, step: usize },

    #[error("divergence: |theta| = {value:e} exceeded bound {bound:e} on level {level} at iteration {iteration}")]
    Divergence {
        level: usize,
        iteration: u64,
        value: f64,
        bound: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors raised while iterating (blow-up or divergence), as
    /// opposed to bad inputs.
    pub fn is_run_abort(&self) -> bool {
        matches!(self, Error::ModelBlowUp { .. } | Error::Divergence { .. })
    }
}
