//! Error type shared by all estimation stages.

use thiserror::Error;

/// Errors produced while loading data, validating a design, or estimating.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in input")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse value `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: negative weight {weight}")]
    NegativeWeight { row: usize, weight: f64 },

    #[error("unit `{unit}` carries conflicting first-treatment periods ({a} and {b})")]
    InconsistentGroup { unit: String, a: String, b: String },

    #[error("unit `{unit}` carries conflicting cluster ids (`{a}` and `{b}`)")]
    InconsistentCluster { unit: String, a: String, b: String },

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("control mode requires never-treated units but none are present")]
    NoControlUnits,

    #[error("no control units available for group {g} at period {t}")]
    EmptyControl { g: i32, t: i32 },

    #[error("base period {base} not observed for group {g}")]
    MissingBasePeriod { g: i32, base: i32 },

    #[error("group {g} has no usable treated observations at period {t}")]
    EmptyTreated { g: i32, t: i32 },

    #[error("control design matrix is singular for group {g} at period {t}")]
    SingularDesign { g: i32, t: i32 },

    #[error("treated covariate pattern {pattern:?} has no support among controls (group {g}, period {t})")]
    UnsupportedPattern { g: i32, t: i32, pattern: Vec<u8> },

    #[error("no cells were estimable under the requested design")]
    NoEstimableCells,

    #[error("group {0} has no estimated post-treatment cells")]
    NoPostPeriods(i32),

    #[error("estimate labels do not match: {0}")]
    LabelMismatch(String),

    #[error("clustered inference requires at least 2 clusters, found {0}")]
    TooFewClusters(usize),

    #[error("influence contributions for `{label}` are not centered (sum = {sum:e})")]
    UncenteredInfluence { label: String, sum: f64 },

    #[error("treatment indicator is collinear with the fixed effects")]
    Collinear,

    #[error("fixed-effects solver did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("balanced panel required: {0}")]
    UnbalancedPanel(String),

    #[error("group {g} is treated from the first observed period")]
    AlwaysTreated { g: i32 },

    #[error("fixed-effects design is disconnected: {0}")]
    DisconnectedDesign(String),

    #[error("group {g} has fewer than 2 observed pre-treatment periods")]
    InsufficientPrePeriods { g: i32 },

    #[error("invalid generator specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable numeric category, shared by the CLI exit code and the C API
    /// error code: 2 invalid configuration, 3 input data problem,
    /// 4 estimation failure, 5 incompatible runs.
    pub fn category(&self) -> u8 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidSpec(_) | Error::Json(_) => 2,
            Error::Io(_)
            | Error::Csv(_)
            | Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::NegativeWeight { .. }
            | Error::InconsistentGroup { .. }
            | Error::InconsistentCluster { .. }
            | Error::UnknownCovariate(_) => 3,
            Error::IncompatibleRuns(_) | Error::LabelMismatch(_) => 5,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
