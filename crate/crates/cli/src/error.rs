use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    BadFlags(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadFlags(_) | CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}
