use std::path::PathBuf;

use serde::Serialize;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}:{line}: weight `{value}` is not a positive number")]
    NonPositiveWeight { path: PathBuf, line: usize, value: String },

    #[error("{path}: column `{name}` appears more than once")]
    DuplicateColumn { path: PathBuf, name: String },

    #[error("{path}: invalid partition: {message}")]
    PartitionInvalid { path: PathBuf, message: String },

    #[error("{path}: cell {cell} has a negative count")]
    NegativeCount { path: PathBuf, cell: usize },

    #[error("configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] tablelogit_core::Error),
}

/// The single error record written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "Io",
            CliError::Parse { .. } => "ParseError",
            CliError::NonPositiveWeight { .. } => "NonPositiveWeight",
            CliError::DuplicateColumn { .. } => "DuplicateColumn",
            CliError::PartitionInvalid { .. } => "PartitionInvalid",
            CliError::NegativeCount { .. } => "NegativeCount",
            CliError::Config(_) => "Config",
            CliError::Validation(_) => "ValidationFailed",
            CliError::Core(e) => core_kind(e),
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

fn core_kind(e: &tablelogit_core::Error) -> &'static str {
    use tablelogit_core::Error as E;
    match e {
        E::UnknownCovariate(_) => "UnknownCovariate",
        E::DuplicateCovariate(_) => "DuplicateCovariate",
        E::MissingTableCovariateValue { .. } => "MissingTableCovariateValue",
        E::MissingCovariateAtPredict { .. } => "MissingCovariateAtPredict",
        E::UnexpectedMissing { .. } => "UnexpectedMissing",
        E::NonPositiveWeight { .. } => "NonPositiveWeight",
        E::InvalidDataset(_) => "InvalidDataset",
        E::InvalidPartition(_) | E::CellOverlap { .. } | E::CoverageGap { .. } => "PartitionInvalid",
        E::RowOutsidePartition { .. } => "RowOutsidePartition",
        E::NegativeCount { .. } => "NegativeCount",
        E::EmptyLabelTotal { .. } => "EmptyLabelTotal",
        E::EmptyCell { .. } => "EmptyCell",
        E::DegenerateCellProbability { .. } => "DegenerateCellProbability",
        E::SingularHessian { .. } => "SingularHessian",
        E::InvalidTarget(_) => "InvalidTarget",
        E::BracketFailure { .. } => "BracketFailure",
        E::InsufficientCompleteRows { .. } => "InsufficientCompleteRows",
        E::SingularImputationModel(_) => "SingularImputationModel",
        E::InconsistentDesigns => "InconsistentDesigns",
        E::Uncalibrated => "Uncalibrated",
        E::TooManyFailedReplicates { .. } => "TooManyFailedReplicates",
        E::LengthMismatch { .. } => "LengthMismatch",
        E::InvalidArgument(_) => "InvalidArgument",
    }
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_with_two() {
        let e = CliError::Core(tablelogit_core::Error::SingularImputationModel("x".into()));
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 1);
        let e = CliError::Core(tablelogit_core::Error::InvalidArgument("y".into()));
        assert_eq!(e.record().exit_code, 1);
    }

    #[test]
    fn offsets_map_to_lines() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
