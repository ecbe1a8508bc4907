use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("bag `{0}` has no instances")]
    EmptyBag(String),
    #[error("bag `{0}` has zero-dimensional instances")]
    ZeroDim(String),
    #[error("duplicate bag id `{0}`")]
    DuplicateBagId(String),
    #[error("bag `{0}` contains a non-finite feature value")]
    NonFiniteFeature(String),
    #[error("dataset contains no bags")]
    EmptyDataset,
    #[error("bag id `{0}` cannot be written in the dataset format")]
    InvalidBagId(String),
    #[error("bag `{0}` has no label")]
    MissingLabel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training data contains only one class")]
    SingleClass,
    #[error("training fold (repeat {repeat}, fold {fold}) contains only one class")]
    SingleClassFold { repeat: usize, fold: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cannot split {bags} bags into {folds} folds")]
    TooFewBags { bags: usize, folds: usize },
    #[error("class with {count} bags cannot be stratified into {folds} folds")]
    TooFewPerClass { count: usize, folds: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: bag `{bag}` has inconsistent labels")]
    InconsistentBagLabel { line: usize, bag: String },
    #[error("unsupported model header: {0}")]
    VersionMismatch(String),
    #[error("reference set fingerprint mismatch: model expects {expected}, got {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
