use thiserror::Error;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Mesh,
    Solver,
    Analysis,
    Io,
}

#[derive(Debug, Error)]
pub enum VemError {
    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("inclusion does not conform to the mesh: {0}")]
    Conformity(String),

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid mesh topology: {0}")]
    Topology(String),

    #[error("point ({x}, {y}) is not inside any cell")]
    Location { x: f64, y: f64 },

    #[error("transfer failed for reference cell {cell}: {reason}")]
    Transfer { cell: usize, reason: String },

    #[error("{strategy} solver failed: {reason}")]
    Solver {
        strategy: &'static str,
        reason: String,
    },

    #[error("{strategy} solver did not converge (relative residual {residual:.3e})")]
    NotConverged {
        strategy: &'static str,
        residual: f64,
    },

    #[error("reference pressure has zero range")]
    ZeroRange,

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VemError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            VemError::Config(_) | VemError::Json(_) => ErrorKind::Config,
            VemError::Constraint(_)
            | VemError::Conformity(_)
            | VemError::DegenerateCell { .. }
            | VemError::DegenerateGeometry(_)
            | VemError::Topology(_)
            | VemError::Parse { .. } => ErrorKind::Mesh,
            VemError::Solver { .. } | VemError::NotConverged { .. } => ErrorKind::Solver,
            VemError::Location { .. }
            | VemError::Transfer { .. }
            | VemError::ZeroRange
            | VemError::Ordering(_) => ErrorKind::Analysis,
            VemError::Io(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T, E = VemError> = std::result::Result<T, E>;
