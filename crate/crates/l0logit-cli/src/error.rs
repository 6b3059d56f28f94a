//! CLI error type carrying the documented exit codes: 1 for usage errors,
//! 2 for numerical or I/O failures.

use l0logit::{BnbError, DataError, RelaxError, ScreenError};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration — exit code 1.
    Usage(String),
    /// Numerical failure, I/O failure, or safety tripwire — exit code 2.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            // Bad generator/shape parameters come from command-line values.
            DataError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<RelaxError> for CliError {
    fn from(e: RelaxError) -> Self {
        match e {
            // Invalid gamma/mu/k/M values come from command-line flags.
            RelaxError::InvalidParameter(_)
            | RelaxError::BudgetTooLarge { .. }
            | RelaxError::InfeasibleFixings { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<ScreenError> for CliError {
    fn from(e: ScreenError) -> Self {
        match e {
            ScreenError::InvalidK { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<BnbError> for CliError {
    fn from(e: BnbError) -> Self {
        match e {
            BnbError::Relax(inner) => CliError::from(inner),
            BnbError::Screen(inner) => CliError::from(inner),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}
