use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Integration(String),

    #[error("{0}")]
    Io(String),

    #[error("verification failed: {passed} of {total} checks passed")]
    VerifyFailed { passed: usize, total: usize },
}

impl CliError {
    /// 1: failed checks, 2: configuration or input error, 3: integration failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Integration(_) => 3,
        }
    }
}

impl From<igflow_core::Error> for CliError {
    fn from(e: igflow_core::Error) -> Self {
        match &e {
            igflow_core::Error::Integration { last: Some((t, y)), .. } => {
                let state: Vec<String> = y.iter().map(|x| format!("{x}")).collect();
                CliError::Integration(format!("{e}; last good state at {t}: ({})", state.join(", ")))
            }
            igflow_core::Error::Integration { .. } => CliError::Integration(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
