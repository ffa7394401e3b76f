use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 parse, 3 config, 4 solver, 1 for I/O on the
    /// output side.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Write { .. } => 1,
        }
    }
}

impl From<segreg::Error> for CliError {
    fn from(err: segreg::Error) -> Self {
        // Input data errors are mapped to `Parse` where the data is read.
        if err.is_solver_failure() {
            CliError::Solver(err.to_string())
        } else {
            CliError::Config(err.to_string())
        }
    }
}
