//! Library side of the command line: problem files, the machine report
//! format, and the command implementations. The binary in `main.rs` is a
//! thin argument-parsing shell over [`commands`].

pub mod commands;
pub mod problem;
pub mod report;

#[derive(Debug)]
pub enum CliError {
    /// malformed input: files, flags, expressions, scale membership
    Usage(String),
    /// runtime math failure: undefined functional, singular evaluation
    Domain(String),
    /// a requested check did not pass
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Verification(m) => m,
        }
    }
}

impl From<tsvar::Error> for CliError {
    fn from(e: tsvar::Error) -> Self {
        use tsvar::Error::*;
        match e {
            EvalDomain { .. } | OutsideDomain { .. } | UnboundVariable(_) => {
                CliError::Domain(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Text,
    Machine,
}
