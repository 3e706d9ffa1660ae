use std::fmt;

use serde::Serialize;

use cyclebench::error::CbError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Runtime,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Runtime => 2,
        }
    }
}

/// Error reported on stderr as `{"error", "kind", "stage"}`.
#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub error: String,
    pub kind: ErrorKind,
    pub stage: String,
}

impl CliError {
    pub fn validation(stage: &str, message: impl Into<String>) -> Self {
        CliError { error: message.into(), kind: ErrorKind::Validation, stage: stage.into() }
    }

    pub fn runtime(stage: &str, message: impl Into<String>) -> Self {
        CliError { error: message.into(), kind: ErrorKind::Runtime, stage: stage.into() }
    }

    pub fn from_core(stage: &str, err: CbError) -> Self {
        let kind = if err.is_validation() { ErrorKind::Validation } else { ErrorKind::Runtime };
        CliError { error: err.to_string(), kind, stage: stage.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage to core results.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for cyclebench::error::Result<T> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}
