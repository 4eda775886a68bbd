use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh needs at least one subdivision per side")]
    ZeroSubdivisions,
    #[error("unsupported Lagrange degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),
    #[error("DOF map built on a {found}x{found} mesh used with a {expected}x{expected} mesh")]
    Mismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeError {
    #[error("no quadrature rule of degree {0} (supported: 2, 4, 6)")]
    UnsupportedQuadrature(usize),
    #[error("degenerate triangle (det J = {0:e})")]
    DegenerateElement(f64),
}

/// Best iterate carried by an iterative-solver failure. `Debug` prints a
/// summary instead of every entry.
#[derive(Clone, PartialEq)]
pub struct Iterate(pub Vec<f64>);

impl std::fmt::Debug for Iterate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let norm = self.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        write!(f, "Iterate(len {}, norm {norm:e})", self.0.len())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of range for a {dim}x{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("dimension mismatch: matrix is {matrix}, vector is {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("singular matrix: no usable pivot at index {pivot}")]
    Singular { pivot: usize },
    #[error("direct solve residual {residual:e} exceeds {bound:e}")]
    InaccurateSolve { residual: f64, bound: f64 },
    #[error("BiCGSTAB breakdown at iteration {iteration} (relative residual {residual:e})")]
    Breakdown {
        iteration: usize,
        residual: f64,
        best: Iterate,
    },
    #[error("BiCGSTAB did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Iterate,
    },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("sparse factorization failed: {0}")]
    Backend(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter {name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("stabilization denominator vanishes (D, U and alpha are all zero)")]
    VanishingDenominator,
    #[error("velocity field does not match the mesh: {0}")]
    VelocityMismatch(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
