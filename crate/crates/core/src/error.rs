use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,

    #[error("bad magic bytes {found:?}, expected \"SGT1\"")]
    BadMagic { found: [u8; 4] },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("unsupported dtype 0x{0:02x}")]
    UnsupportedDtype(u8),

    #[error("negative activation {value} with non-integer power {power}")]
    NegativeActivation { value: f32, power: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("scale set is empty")]
    EmptyScaleSet,

    #[error("duplicate name {0:?}")]
    DuplicateName(String),

    #[error("k = {k} exceeds database size {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("refinement pool of {pool} descriptors is too small for {k} neighbors")]
    PoolTooSmall { pool: usize, k: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("database index {0} appears more than once in a ranking")]
    DuplicateRank(usize),

    #[error("no result list for query {0:?}")]
    MissingQueryResult(String),

    #[error("empty search bracket: {0}")]
    EmptyBracket(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
