use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("non-manifold edge ({a}, {b}) is shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("inconsistent face orientation: directed edge ({a}, {b}) appears in faces {first} and {second}")]
    InconsistentOrientation {
        a: usize,
        b: usize,
        first: usize,
        second: usize,
    },
    #[error("face {face} is degenerate (collinear or repeated vertices)")]
    DegenerateFace { face: usize },
    #[error("degenerate one-ring geometry at vertex {vertex}")]
    DegenerateGeometry { vertex: usize },
    #[error("point lies behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("MRF instance too large for exhaustive search: {states} states (limit 2^24)")]
    ProblemTooLarge { states: f64 },
    #[error("non-finite gradient at vertex {vertex}")]
    NonFiniteGradient { vertex: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by malformed inputs (files, configs, meshes)
    /// rather than failures during computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidMesh(_)
            | Error::NonManifoldEdge { .. }
            | Error::InconsistentOrientation { .. }
            | Error::DegenerateFace { .. }
            | Error::InvalidCamera(_)
            | Error::Config(_)
            | Error::Format { .. }
            | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
