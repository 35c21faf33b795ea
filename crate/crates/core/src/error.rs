use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("duplicate covariate `{0}`")]
    DuplicateCovariate(String),

    #[error("table covariate `{covariate}` is missing at row {row}")]
    MissingTableCovariateValue { covariate: String, row: usize },

    #[error("covariate `{covariate}` is missing at row {row}")]
    MissingCovariateAtPredict { covariate: String, row: usize },

    #[error("covariate `{covariate}` has a missing value at row {row} but is not imputable")]
    UnexpectedMissing { covariate: String, row: usize },

    #[error("weight at row {row} is not positive and finite ({value})")]
    NonPositiveWeight { row: usize, value: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cells {first} and {second} overlap on {region}")]
    CellOverlap {
        first: usize,
        second: usize,
        region: String,
    },

    #[error("no cell covers the point {point}")]
    CoverageGap { point: String },

    #[error("row {row} lies outside every cell of the partition")]
    RowOutsidePartition { row: usize },

    #[error("cell {cell} has a negative or non-finite count")]
    NegativeCount { cell: usize },

    #[error("table has no observations with label {label}")]
    EmptyLabelTotal { label: u8 },

    #[error("table {table}, cell {cell} contains no dataset weight; merge it with an adjacent cell")]
    EmptyCell { table: usize, cell: usize },

    #[error("table {table}, cell {cell}: probability of label {label} is zero but its count is positive")]
    DegenerateCellProbability { table: usize, cell: usize, label: u8 },

    #[error("Hessian is singular or ill-conditioned (condition number {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("marginal target {0} is not inside (0, 1)")]
    InvalidTarget(f64),

    #[error("cannot bracket the intercept for target {target}")]
    BracketFailure { target: f64 },

    #[error("covariate `{covariate}`: {complete} complete rows, at least {required} required")]
    InsufficientCompleteRows {
        covariate: String,
        complete: usize,
        required: usize,
    },

    #[error("imputation model for `{0}` has a singular design")]
    SingularImputationModel(String),

    #[error("refits disagree on the covariate set")]
    InconsistentDesigns,

    #[error("model intercept has not been calibrated")]
    Uncalibrated,

    #[error("{failed} of {total} replicates failed")]
    TooManyFailedReplicates { failed: usize, total: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to malformed
    /// inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCellProbability { .. }
                | Error::SingularHessian { .. }
                | Error::BracketFailure { .. }
                | Error::SingularImputationModel(_)
                | Error::TooManyFailedReplicates { .. }
        )
    }
}
