use std::path::PathBuf;

use swarmfield::SwarmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// `path` is the dotted location of the offending key, `.` for the root.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("unknown {kind} '{key}' at {path}")]
    InitializerUnknown { kind: &'static str, key: String, path: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("scenario '{scenario}', {stage}: {source}")]
    Model {
        scenario: String,
        stage: String,
        #[source]
        source: SwarmError,
    },
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema { path: path.into(), message: message.into() }
    }

    /// 2 for anything wrong with the scenario file, 3 for failures while running it.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema { .. } | CliError::InitializerUnknown { .. } | CliError::Read { .. } => 2,
            CliError::Write { .. } | CliError::Model { .. } => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
