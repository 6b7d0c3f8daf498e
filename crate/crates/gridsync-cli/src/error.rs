use std::fmt;
use std::path::Path;

/// Failure of a command, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or parameters. Exit code 2.
    Input(String),
    /// A numerical routine failed. Exit code 3.
    Numerical(String),
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(s) => write!(f, "input error: {s}"),
            CliError::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gridsync::Error> for CliError {
    fn from(e: gridsync::Error) -> Self {
        use gridsync::Error as E;
        match e {
            E::InvalidInput(_) | E::WrongFrame | E::UnknownBus(_) | E::Disconnected => CliError::Input(e.to_string()),
            E::Degenerate(_) | E::Singular(_) | E::NoConvergence { .. } | E::Numerical(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv: {e}"))
    }
}

/// Result alias for the command layer.
pub type Result<T> = std::result::Result<T, CliError>;
