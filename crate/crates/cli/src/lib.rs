//! Library side of the experiment binary: configuration, data resolution,
//! run pipelines, and provenance hashing. The binary is a thin argument
//! parser over [`commands`].

pub mod commands;
pub mod config;
pub mod hashing;
pub mod jobs;
pub mod runs;

pub use config::{EpochsTarget, ExperimentConfig};
pub use runs::Strategy;

use qaug::error::Error;

/// Process exit code categories: 2 for configuration problems, 3 for data
/// problems, 4 for runtime/numeric failures.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::Capacity(_) => 2,
        Error::Format(_)
        | Error::Length(_)
        | Error::Consistency(_)
        | Error::EmptyDataset(_)
        | Error::Io(_)
        | Error::Json(_) => 3,
        Error::Numeric(_) | Error::Shape(_) | Error::Index(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_partition_error_kinds() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Capacity("x".into())), 2);
        assert_eq!(exit_code(&Error::Format("x".into())), 3);
        assert_eq!(exit_code(&Error::Length("x".into())), 3);
        assert_eq!(exit_code(&Error::Consistency("x".into())), 3);
        assert_eq!(exit_code(&Error::EmptyDataset("x".into())), 3);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 4);
        assert_eq!(exit_code(&Error::Shape("x".into())), 4);
        assert_eq!(exit_code(&Error::Index("x".into())), 4);
    }
}
