use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("xml parse error at line {line}: {message}")]
    Xml { line: u32, message: String },

    #[error("parse error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("unknown node {0}")]
    UnknownNode(i64),

    #[error("unknown edge {0}")]
    UnknownEdge(u32),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration limit exceeded: more than {limit} paths")]
    TooManyPaths { limit: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at iteration {iteration}: loss is {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical core rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Stage { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// Tags the error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
