use std::fmt;

use serde::Serialize;
use tpm_core::classical::ClassicalError;
use tpm_core::data::DataError;
use tpm_core::pipeline::PipelineError;
use tpm_core::tpm::TpmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad flags, config files or input schema. Exit code 2.
    Config,
    /// Everything else. Exit code 1.
    Runtime,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Runtime => 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn kind_of_data(e: &DataError) -> ErrorKind {
    match e {
        DataError::Io { .. } => ErrorKind::Runtime,
        _ => ErrorKind::Config,
    }
}

fn kind_of_classical(e: &ClassicalError) -> ErrorKind {
    match e {
        ClassicalError::InvalidParameter(_)
        | ClassicalError::InvalidHistory(_)
        | ClassicalError::InvalidWindow { .. }
        | ClassicalError::EmptyData => ErrorKind::Config,
        _ => ErrorKind::Runtime,
    }
}

fn kind_of_tpm(e: &TpmError) -> ErrorKind {
    match e {
        TpmError::Config(_) | TpmError::EmptyData | TpmError::Checkpoint(_) | TpmError::ClassOutOfRange { .. } => {
            ErrorKind::Config
        }
        _ => ErrorKind::Runtime,
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let kind = match &e {
            PipelineError::Data(d) => kind_of_data(d),
            PipelineError::Classical(c) => kind_of_classical(c),
            PipelineError::Tpm(t) => kind_of_tpm(t),
            PipelineError::Markov(_) | PipelineError::ClassMismatch { .. } | PipelineError::Config(_) => {
                ErrorKind::Config
            }
            PipelineError::Metrics(_) => ErrorKind::Runtime,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<ClassicalError> for CliError {
    fn from(e: ClassicalError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<TpmError> for CliError {
    fn from(e: TpmError) -> Self {
        PipelineError::from(e).into()
    }
}
