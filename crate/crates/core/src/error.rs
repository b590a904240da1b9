//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("corrupt image: {path}: {detail}")]
    CorruptImage { path: PathBuf, detail: String },
    #[error("region out of bounds: {0}")]
    RegionOutOfBounds(String),
    #[error("empty region: no masked pixels")]
    EmptyRegion,
    #[error("feature scheme mismatch: expected {expected}, got {got}")]
    SchemeMismatch { expected: String, got: String },
    #[error("training set contains a single class: {0}")]
    SingleClassTrainingSet(String),
    #[error("multiclass training needs at least two classes, got {0}")]
    FewerThanTwoClasses(usize),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("unsupported format version {found} (expected {expected}) in {path}")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("malformed file {path}: {detail}")]
    MalformedFile { path: PathBuf, detail: String },
    #[error("missing required column: {0}")]
    MissingColumn(String),
    #[error("malformed row {row}: {detail}")]
    MalformedRow { row: usize, detail: String },
    #[error("layout overflow: {0}")]
    LayoutOverflow(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
