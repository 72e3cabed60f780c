use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh generation failed: {0}")]
    Meshing(String),

    #[error("malformed mesh file, line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("root bracketing failed on ({lo}, {hi}): {msg}")]
    RootBracketing { lo: f64, hi: f64, msg: String },

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
