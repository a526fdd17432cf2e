use thiserror::Error;

use rdd_core::agents::AgentError;
use rdd_core::EstimatorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit status: 1 for usage errors, 2 for failed runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            _ => 2,
        }
    }
}

impl From<AgentError> for HarnessError {
    fn from(e: AgentError) -> Self {
        HarnessError::Run(e.to_string())
    }
}

impl From<EstimatorError> for HarnessError {
    fn from(e: EstimatorError) -> Self {
        HarnessError::Run(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
