use std::path::PathBuf;

use thiserror::Error;

/// Exit codes: 0 ok, 1 validation, 2 capability, 3 runtime.
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_CAPABILITY: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {}{message}", field_prefix(field))]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    /// A model error attributed to the spec block that produced it.
    #[error("spec block '{block}': {source}")]
    Block { block: String, source: haxc::Error },
    #[error("spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Input(String),
    /// An input file could not be read; the caller's mistake.
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    /// Writing output failed.
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Runtime(String),
    /// Some density or stdf rows failed; their records are in the output.
    #[error("{failed} of {total} rows failed; see the error column")]
    RowErrors { failed: usize, total: usize },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn block(block: impl Into<String>, source: haxc::Error) -> Self {
        CliError::Block { block: block.into(), source }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn read(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Read { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Block { source, .. } => match source {
                haxc::Error::Capability(_) => EXIT_CAPABILITY,
                haxc::Error::Numerical(_) => EXIT_RUNTIME,
                _ => EXIT_VALIDATION,
            },
            CliError::Io { .. } | CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Parse { .. }
            | CliError::Read { .. }
            | CliError::Spec(_)
            | CliError::Input(_)
            | CliError::RowErrors { .. }
            | CliError::ChecksFailed { .. } => EXIT_VALIDATION,
        }
    }
}

fn field_prefix(field: &str) -> String {
    match field {
        "" | "?" | "." => String::new(),
        f => format!("at '{f}': "),
    }
}

pub type CliResult<T> = Result<T, CliError>;
