use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Numeric,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic at byte offset 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {version} at byte offset 4")]
    BadVersion { version: u32 },

    #[error("truncated payload: expected {expected} bytes, file has {found} (short at byte offset {found})")]
    Truncated { expected: u64, found: u64 },

    #[error("trailing bytes after payload at byte offset {offset}")]
    TrailingBytes { offset: u64 },

    #[error("non-finite value at byte offset {offset} (row {row}, column {col})")]
    NonFiniteEntry { offset: u64, row: usize, col: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },

    #[error("embedding rows are not unit-normalized")]
    NotNormalized,

    #[error("empty subset")]
    EmptySubset,

    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("kernel cache has no {0}")]
    MissingCache(&'static str),

    #[error("budget {budget} exceeds {available} candidates")]
    BudgetTooLarge { budget: usize, available: usize },

    #[error("C({n},{k}) = {count} subsets exceeds the enumeration cap of {cap}")]
    CombinatorialCap {
        n: usize,
        k: usize,
        count: u128,
        cap: u128,
    },

    #[error("remaining probability mass vanished at draw {step}")]
    VanishingTailMass { step: usize },

    #[error("non-finite logit at position {index}")]
    NonFiniteLogit { index: usize },

    #[error("non-finite reward at epoch {epoch}, rollout {rollout}")]
    NonFiniteReward { epoch: usize, rollout: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Io { .. }
            | Error::BadMagic { .. }
            | Error::BadVersion { .. }
            | Error::Truncated { .. }
            | Error::TrailingBytes { .. }
            | Error::Parse { .. } => Category::Io,
            Error::NonFiniteEntry { .. }
            | Error::ZeroNormRow { .. }
            | Error::NotNormalized
            | Error::VanishingTailMass { .. }
            | Error::NonFiniteLogit { .. }
            | Error::NonFiniteReward { .. }
            | Error::NonFinite(_) => Category::Numeric,
            Error::EmptySubset
            | Error::IndexOutOfRange { .. }
            | Error::MissingCache(_)
            | Error::BudgetTooLarge { .. }
            | Error::CombinatorialCap { .. }
            | Error::Invalid(_) => Category::Config,
        }
    }
}
