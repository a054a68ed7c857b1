use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Core(#[from] repeller_core::Error),
}

impl CliError {
    /// `1` for configuration and IO problems, `2` for failures of the pipeline itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(repeller_core::Error::InvalidEpsilon { .. }) | CliError::Core(repeller_core::Error::BadParameter(_)) => 1,
            CliError::Core(_) => 2,
            _ => 1,
        }
    }
}
