use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] s3m_core::Error),
    #[error("{path}: no valid report records ({malformed} malformed lines)")]
    NoValidRecords { path: PathBuf, malformed: usize },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("not a model bundle (bad magic bytes)")]
    BadMagic,
    #[error("bundle checksum mismatch: stored {stored:08x}, computed {computed:08x} (file truncated or corrupt)")]
    Checksum { stored: u32, computed: u32 },
    #[error("unsupported bundle format version {found}, this build reads version {supported}")]
    Version { found: u32, supported: u32 },
    #[error("malformed bundle: {0}")]
    Bundle(String),
    #[error("{0}")]
    Usage(String),
    #[error("gradient check failed: max relative error {max_rel_error:e} exceeds {tolerance:e}")]
    GradcheckFailed { max_rel_error: f64, tolerance: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
