use std::fmt;
use std::path::Path;

use pathwise::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const GEOMETRY: i32 = 4;
    pub const CERTIFICATION: i32 = 5;
}

/// A failure carrying the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: exit::INPUT,
            message: message.into(),
        }
    }

    /// Malformed content at `line` (1-based) of `path`.
    pub fn at_line(path: &Path, line: u64, message: impl fmt::Display) -> Self {
        Self::input(format!("{}:{line}: {message}", path.display()))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::input(format!("{}: {err}", path.display()))
    }

    pub fn certification(message: impl Into<String>) -> Self {
        CliError {
            code: exit::CERTIFICATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn code_for(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } => exit::NOT_CONVERGED,
        Error::GridTooSmall { .. } => exit::GEOMETRY,
        Error::AtGridPoint { source, .. } => code_for(source),
        _ => exit::INPUT,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError {
            code: code_for(&err),
            message: err.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_errors_map_to_exit_codes() {
        let nc = Error::NotConverged { index: 3, limit: 10 };
        assert_eq!(CliError::from(nc.clone()).code, exit::NOT_CONVERGED);
        let wrapped = Error::AtGridPoint { index: 1, source: Box::new(Error::GridTooSmall { n1: 2, n2: 2 }) };
        assert_eq!(CliError::from(wrapped).code, exit::GEOMETRY);
        assert_eq!(CliError::from(Error::RankDeficient).code, exit::INPUT);
    }
}
