use std::path::PathBuf;

use toha_core::{GraphError, SelectionError};

/// Problems with the bytes of an ATTG container.
#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("bad magic {0:?}, expected \"ATTG\"")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported container flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("truncated container: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("container has {0} trailing bytes")]
    TrailingBytes(u64),
    #[error("non-finite weight at payload index {index}")]
    NonFiniteWeight { index: usize },
    #[error("weight {value} at payload index {index} is outside [0, 1]")]
    WeightOutOfRange { index: usize, value: f32 },
    #[error("invalid container: {0}")]
    Invariant(String),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    IoBare(#[from] std::io::Error),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("{path}: {source}")]
    ContainerFile {
        path: PathBuf,
        #[source]
        source: ContainerError,
    },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("sample {id:?}: container {path} does not exist")]
    DanglingPath { id: String, path: PathBuf },
    #[error(
        "sample {id:?}: manifest says {field} = {manifest}, container header says {container}"
    )]
    HeaderMismatch {
        id: String,
        field: &'static str,
        manifest: u32,
        container: u32,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("divergence cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("synthetic spec: {0}")]
    Synth(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}
