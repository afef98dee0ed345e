use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),
    #[error("solver: {0}")]
    Solver(#[from] matchkit_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 1,
            _ => 2,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
