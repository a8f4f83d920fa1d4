use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("geometry leaves the canonical domain [-0.5, 0.5]^3: {0}")]
    OutOfDomain(String),
    #[error("lattice resolution {found} does not match grid resolution {expected}")]
    ResolutionMismatch { expected: usize, found: usize },
    #[error("insufficient samples: {available} occupied blocks for rank {requested}")]
    InsufficientSamples { available: u64, requested: usize },
    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("invalid file format: {0}")]
    Format(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Parse { .. } => "ParseError",
            Error::EmptyMesh => "EmptyMesh",
            Error::DegenerateMesh(_) => "DegenerateMesh",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::ResolutionMismatch { .. } => "ResolutionMismatch",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::SpecMismatch(_) => "SpecMismatch",
            Error::Format(_) => "FormatError",
            Error::Checksum { .. } => "ChecksumError",
            Error::UnknownCategory(_) => "UnknownCategory",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
