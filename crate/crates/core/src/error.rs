use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("border mask has no pixels to sample from")]
    EmptyBorder,

    #[error("slide has no scoreable tissue: {0}")]
    EmptySlide(String),

    #[error("labels contain a single class; ROC analysis needs both")]
    DegenerateLabels,

    #[error("fold {fold} lacks one of the classes")]
    DegenerateFold { fold: usize },

    #[error("cannot stratify into {k} folds: class `{class}` has only {count} patients")]
    Stratification {
        class: &'static str,
        count: usize,
        k: usize,
    },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("could not place {requested} non-overlapping blobs after {attempts} attempts")]
    Placement { requested: usize, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
