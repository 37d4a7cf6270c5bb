use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// A stage ran and failed; exit code 1.
    #[error("{stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }

    pub fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Stage {
            stage,
            message: e.to_string(),
        }
    }
}
