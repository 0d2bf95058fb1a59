use std::fmt;
use std::path::Path;

use lightmesh_core::pipeline::PipelineError;

/// Failure of one stage, printed as a single machine-readable line.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &str, kind: &str, message: impl Into<String>) -> Self {
        Self {
            stage: stage.to_string(),
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    pub fn io(stage: &str, path: &Path, err: impl fmt::Display) -> Self {
        Self::new(stage, "Io", format!("{}: {err}", path.display()))
    }

    pub fn from_pipeline(stage: &str, err: &PipelineError) -> Self {
        Self::new(stage, &err.kind(), err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self
            .message
            .replace('\\', "\\\\")
            .replace('"', "\\\"")
            .replace('\n', " ");
        write!(
            f,
            "error stage={} kind={} message=\"{msg}\"",
            self.stage, self.kind
        )
    }
}

impl std::error::Error for CliError {}
