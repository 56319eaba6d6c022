use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("gradient tape is incomplete: {0}")]
    IncompleteTape(String),

    #[error("invalid graph: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),

    #[error("view angle mismatch: {0} vs {1}")]
    ViewAngleMismatch(String, String),

    #[error("first graph has {n1} nodes but second has {n2}; caller must order so that n1 <= n2")]
    SizeOrder { n1: usize, n2: usize },

    #[error("duplicate label {0} within one graph")]
    DuplicateLabel(String),

    #[error("unlabeled node {0}")]
    MissingLabel(u64),

    #[error("label splitting is ambiguous: {0}")]
    AmbiguousSplit(String),

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("segment set is disconnected ({0} components)")]
    Disconnected(usize),

    #[error("intensity features requested but mask has no intensity plane")]
    MissingIntensity,

    #[error("polyline point ({x:.2}, {y:.2}) lies outside the {width}x{height} image")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("no same-view training pair available")]
    NoTrainingPair,

    #[error("no usable template: {}", .0.iter().map(|(id, r)| format!("{id}: {r}")).collect::<Vec<_>>().join(", "))]
    NoUsableTemplate(Vec<(String, String)>),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("unsupported format version {found} (this build reads up to {supported})")]
    Version { found: u32, supported: u32 },

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
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

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
