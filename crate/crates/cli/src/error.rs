use std::fmt;
use std::path::Path;

use serde::Serialize;

/// Failure of a command. Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data { code: &'static str, message: String },
    Io { path: String, message: String },
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn model(message: impl Into<String>) -> Self {
        CliError::Data {
            code: "invalid_model",
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data { .. } | CliError::Io { .. } => 1,
        }
    }

    /// Single-line JSON diagnostic for the error stream.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let body = match self {
            CliError::Usage(m) => Body {
                kind: "usage",
                message: m.clone(),
            },
            CliError::Data { code, message } => Body {
                kind: code,
                message: message.clone(),
            },
            CliError::Io { path, message } => Body {
                kind: "io",
                message: format!("{path}: {message}"),
            },
        };
        serde_json::to_string(&Wrapper { error: body }).expect("diagnostic serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

impl From<tdp_risk::Error> for CliError {
    fn from(err: tdp_risk::Error) -> Self {
        CliError::Data {
            code: err.code(),
            message: err.to_string(),
        }
    }
}
