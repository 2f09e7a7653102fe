use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("evaluation budget of {0} exhausted before convergence; best-so-far parameters written")]
    MaxEvals(usize),
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Solver(_) => 4,
            CliError::MaxEvals(_) => 5,
            CliError::Analysis(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<snapnet::netsim::CsvError> for CliError {
    fn from(e: snapnet::netsim::CsvError) -> Self {
        use snapnet::netsim::CsvError;
        match e {
            CsvError::Csv(c) if c.is_io_error() => CliError::Io(std::io::Error::other(c)),
            other => CliError::Parse(other.to_string()),
        }
    }
}
