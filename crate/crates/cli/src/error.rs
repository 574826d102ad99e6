//! Process-level error handling: exit 2 for usage and configuration
//! problems, exit 1 for internal failures.

use std::fmt;
use std::path::Path;

use pragma_core::harness::HarnessError;
use pragma_core::lm::LmError;
use pragma_core::memory::MemoryError;
use pragma_core::rsa::RsaError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing files, inconsistent configuration.
    Usage(String),
    /// Failures the user cannot fix by changing the invocation.
    Internal(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    /// Annotate an error with the file it came from.
    pub fn reading(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Usage(format!("cannot read {}: {err}", path.display()))
    }

    pub fn writing(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Internal(format!("cannot write {}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(message) => write!(f, "{message}"),
            CliError::Internal(message) => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        match err {
            HarnessError::InsufficientInventory(_)
            | HarnessError::MissingResource(_)
            | HarnessError::TriplesUnavailable
            | HarnessError::EmptyDataset => CliError::Usage(err.to_string()),
            HarnessError::Lm(inner) => inner.into(),
            HarnessError::Rsa(inner) => inner.into(),
            HarnessError::Memory(inner) => inner.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<LmError> for CliError {
    fn from(err: LmError) -> Self {
        match err {
            LmError::EmptyCorpus
            | LmError::InvalidWeights(..)
            | LmError::InvalidSmoothing(_)
            | LmError::InvalidOrder(_)
            | LmError::InvalidSnapshot(_) => CliError::Usage(err.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<RsaError> for CliError {
    fn from(err: RsaError) -> Self {
        match err {
            RsaError::NegativeAlpha(_)
            | RsaError::NegativeBeta(_)
            | RsaError::InvalidWorldSize(_)
            | RsaError::InvalidMaxLength => CliError::Usage(err.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<MemoryError> for CliError {
    fn from(err: MemoryError) -> Self {
        match err {
            MemoryError::InvalidConfig(_)
            | MemoryError::KTooLarge { .. }
            | MemoryError::PoolTooSmall { .. }
            | MemoryError::EmptyPersonaTable
            | MemoryError::InvalidLabel(_)
            | MemoryError::NoExamples
            | MemoryError::MissingCandidates => CliError::Usage(err.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}
