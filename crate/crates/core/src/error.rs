use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dataset `{0}` (expected one of: nslkdd, unswnb15)")]
    UnknownDataset(String),

    #[error("failed to parse schema document: {0}")]
    SchemaParse(String),

    #[error("invalid schema: {0}")]
    SchemaValidation(String),

    #[error("row {row}: expected {expected} columns, found {found}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    Value {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: label `{label}` is not covered by the label scheme")]
    UnknownLabel { row: usize, label: String },

    #[error("CSV header does not match schema: {0}")]
    Header(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("statistics must be fitted on the training split, got `{0}`")]
    SplitHygiene(String),

    #[error("cannot fit an empty dataset")]
    EmptyDataset,

    #[error("feature `{0}` has no non-missing values in the training split")]
    DegenerateFeature(String),

    #[error("vocabulary of `{feature}` has {size} entries, more than a 2-byte index can address")]
    VocabularyOverflow { feature: String, size: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("categorical feature {feature}: index {index} exceeds vocabulary maximum {max}")]
    DecodeRange {
        feature: usize,
        index: u16,
        max: u16,
    },

    #[error(
        "continuous payload of {needed} bytes exceeds trajectory capacity of {capacity} bytes"
    )]
    Capacity { needed: usize, capacity: usize },

    #[error(
        "categorical region of {bytes} bytes at row {row} would overlap the trajectory \
         (room for {available} bytes)"
    )]
    Overlap {
        row: usize,
        bytes: usize,
        available: usize,
    },

    #[error("stray byte {value:#04x} at pixel ({row}, {col}) channel {channel}")]
    StrayByte {
        row: usize,
        col: usize,
        channel: usize,
        value: u8,
    },

    #[error("image format error: {0}")]
    Format(String),

    #[error("png: {0}")]
    Png(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("unsupported manifest format_version {0}")]
    UnsupportedVersion(u32),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
