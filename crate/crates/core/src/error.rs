use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the vectorization pipeline.
///
/// Variants are tagged by the stage that raised them so the CLI can
/// report where a run failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input: cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("input: image has zero size")]
    ZeroSize,

    #[error("input: grid of {width}x{height} needs {expected} values, got {actual}")]
    GridShape {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },

    #[error("input: intensity {value} outside [0, {max}]")]
    IntensityRange { value: f64, max: f64 },

    #[error("input: no dark pixels below the threshold")]
    EmptyBand,

    #[error("input: mask is {mask_width}x{mask_height}, image is {width}x{height}")]
    MaskDimensions {
        width: usize,
        height: usize,
        mask_width: usize,
        mask_height: usize,
    },

    #[error("field: {0}")]
    Field(String),

    #[error("field: non-finite energy after {iteration} iterations")]
    NonFiniteEnergy { iteration: usize },

    #[error("vectorize: {0}")]
    Embedding(String),

    #[error("config: {0}")]
    Config(String),

    #[error("output: cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stage tag used in CLI diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Read { .. }
            | Error::Decode { .. }
            | Error::ZeroSize
            | Error::GridShape { .. }
            | Error::IntensityRange { .. }
            | Error::EmptyBand
            | Error::MaskDimensions { .. } => "input",
            Error::Field(_) | Error::NonFiniteEnergy { .. } => "field",
            Error::Embedding(_) => "vectorize",
            Error::Config(_) => "config",
            Error::Write { .. } => "output",
        }
    }
}
