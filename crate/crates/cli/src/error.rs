use sparse_ssk::LabError;

/// Errors reach stderr as `error[<kind>]: <message>`.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or preconditions; nothing was sampled. Exit 2.
    Usage(String),
    /// Too many trials failed. Exit 1.
    Abort(String),
    /// Anything else that went wrong while computing or writing. Exit 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Abort(_) | CliError::Runtime(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Abort(_) => "abort",
            CliError::Runtime(_) => "runtime",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Abort(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        let msg = e.to_string();
        match e {
            LabError::InvalidConfig(_)
            | LabError::Precondition(_)
            | LabError::NearCritical { .. }
            | LabError::InsufficientTrials { .. }
            | LabError::OverflowGuard { .. }
            | LabError::Parse(_) => CliError::Usage(msg),
            LabError::ExperimentAborted { .. } => CliError::Abort(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}
