use merl_core::MerlError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input, invalid field or unreadable file.
    #[error("{0}")]
    Parse(String),
    /// Numerical failure or a violated consistency check.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse(_) => EXIT_PARSE,
            Self::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Parse(format!("{}: {e}", path.display()))
    }
}

impl From<MerlError> for CliError {
    fn from(e: MerlError) -> Self {
        match e {
            MerlError::NotHermitian { .. }
            | MerlError::ZeroProbabilityCondition { .. }
            | MerlError::Consistency(_)
            | MerlError::Numeric(_) => Self::Numeric(e.to_string()),
            _ => Self::Parse(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::from(MerlError::Numeric("x".into())).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::from(MerlError::Consistency("x".into())).exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::from(MerlError::EmptyKeepSet).exit_code(), EXIT_PARSE);
        assert_eq!(CliError::from(MerlError::InvalidParameter("x".into())).exit_code(), EXIT_PARSE);
    }
}
