use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed image file: {0}")]
    MalformedFile(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("target dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: u32,
        left_h: u32,
        right_w: u32,
        right_h: u32,
    },

    #[error("pixel buffer holds {actual} entries, expected {expected}")]
    BufferSize { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("image has no pixels")]
    EmptyImage,

    #[error("image is entirely black; illuminant is undefined")]
    AllBlackImage,

    #[error("confusion counts are all zero")]
    EmptyCounts,

    #[error("nothing to aggregate")]
    EmptyInput,

    #[error("manifest is missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate case id `{0}`")]
    DuplicateCaseId(String),

    #[error("unknown lesion type `{0}`")]
    UnknownLesionType(String),

    #[error("manifest has no records")]
    EmptyManifest,

    #[error("manifest has no model named `{0}`")]
    UnknownModel(String),

    #[error("ensemble fusion needs exactly two models, manifest declares {0}")]
    ModelCount(usize),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("malformed report: {0}")]
    Report(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{} case(s) failed", .0.len())]
    Cases(Vec<Error>),

    #[error("case `{case_id}`: {source}")]
    Case {
        case_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_case(self, case_id: &str) -> Self {
        Error::Case {
            case_id: case_id.to_owned(),
            source: Box::new(self),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
