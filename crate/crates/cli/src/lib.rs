//! Library half of the `docg` command-line tool: configuration, workspace
//! artifacts and the subcommands themselves.

pub mod commands;
pub mod config;
pub mod workspace;

use docg_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_MISSING_ARTIFACT: i32 = 3;
pub const EXIT_UNCONFIGURED: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;
/// A remote service kept failing after all retries, or refused outside an
/// edit loop.
pub const EXIT_REMOTE: i32 = 6;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingArtifact { .. } => EXIT_MISSING_ARTIFACT,
        Error::Unconfigured(_) => EXIT_UNCONFIGURED,
        Error::Numeric(_) => EXIT_NUMERIC,
        Error::Transport { .. } | Error::Refused(_) => EXIT_REMOTE,
        _ => EXIT_VALIDATION,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
        assert_eq!(
            exit_code(&Error::MissingArtifact {
                path: "p".into(),
                hint: "h".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::Unconfigured("x".into())), 4);
        assert_eq!(exit_code(&Error::Numeric("nan".into())), 5);
        assert_eq!(
            exit_code(&Error::Transport {
                attempts: 4,
                message: "timeout".into()
            }),
            6
        );
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
    }
}
