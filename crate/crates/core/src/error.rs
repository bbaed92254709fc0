use thiserror::Error;

/// Errors produced by the graph, spectral and model layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {0} has no outgoing weight; augment the graph before normalizing")]
    DeadEndRow(usize),

    #[error("graph is not strongly connected")]
    NotIrreducible,

    #[error("mean feature direction is the zero vector")]
    ZeroMean,

    #[error("could not draw an auxiliary vector off the mean direction after {attempts} attempts")]
    DegenerateAux { attempts: usize },

    #[error("k must be a positive even integer, got {0}")]
    InvalidK(usize),

    #[error("graph has no features")]
    MissingFeatures,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense linear system is singular")]
    SingularSystem,

    #[error("eigensolver failed after {restarts} restarts ({matvecs} matvecs), worst residual {residual:e}")]
    EigensolverFailure { restarts: usize, matvecs: usize, residual: f64 },

    #[error("row {0} keeps no commute-time entries; mu is too large for this graph")]
    EmptyRow(usize),

    #[error("combinatorial graph is not regular")]
    NotRegular,

    #[error("mask selects no nodes")]
    EmptyMask,

    #[error("graph has no edges")]
    EmptyEdgeSet,

    #[error("class {class} has {size} nodes, too few for every split part")]
    ClassTooSmall { class: usize, size: usize },

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },

    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
