use thiserror::Error;

/// Errors raised by the reconciliation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed hierarchy document: {0}")]
    SpecFormat(String),

    #[error("cycle detected in hierarchy through `{0}`")]
    Cycle(String),

    #[error("hierarchy has multiple roots: {0:?}")]
    MultipleRoots(Vec<String>),

    #[error("duplicate edge {parent} -> {child}")]
    DuplicateEdge { parent: String, child: String },

    #[error("series `{child}` has more than one parent (`{first}`, `{second}`)")]
    MultipleParents {
        child: String,
        first: String,
        second: String,
    },

    #[error("top series `{0}` does not appear in the hierarchy")]
    UnknownTop(String),

    #[error("top series `{top}` is not the root of the hierarchy (root is `{root}`)")]
    TopNotRoot { top: String, root: String },

    #[error("hierarchies disagree on the top series: expected `{expected}`, found `{found}`")]
    TopMismatch { expected: String, found: String },

    #[error("series `{0}` appears in more than one hierarchy")]
    DuplicateSeries(String),

    #[error("constraint matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("series `{0}` is missing")]
    MissingSeries(String),

    #[error("unexpected series `{0}`")]
    ExtraSeries(String),

    #[error("series `{series}` has a gap or duplicate at horizon {horizon}")]
    HorizonGap { series: String, horizon: usize },

    #[error("series `{series}` has no value for period {period}")]
    MissingValue { series: String, period: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("series too short: need at least {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("weight matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("zero-variance residual column {0}")]
    ZeroVariance(usize),

    #[error("Cholesky factorisation of U'WU failed")]
    CholeskyFailed,

    #[error("constraint violation {violation:e} after reconciliation (condition estimate {condition:e})")]
    ConstraintViolation { violation: f64, condition: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad period label `{0}` (expected YYYYQn)")]
    BadPeriod(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window {window} (origin {origin}) failed: {source}")]
    Window {
        window: usize,
        origin: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
