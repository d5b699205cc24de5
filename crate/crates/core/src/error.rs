use thiserror::Error;

/// Errors raised by mesh construction, discretization and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mesh level must be at least 1, got {0}")]
    InvalidLevel(u32),
    #[error("triangle {0} is degenerate (signed area {1:e})")]
    DegenerateTriangle(usize, f64),
    #[error("no quadrature rule of degree {0}")]
    UnsupportedDegree(usize),
    #[error("edge {0} is not a boundary edge")]
    NotBoundaryEdge(usize),
    #[error("element {0} has no interior edge")]
    NoInteriorEdge(usize),
    #[error("operation requires mesh level >= {required}, got {level}")]
    LevelTooCoarse { level: u32, required: u32 },
    #[error("boundary companion of edge {edge} references boundary edge {companion}")]
    BoundaryCompanion { edge: usize, companion: usize },
    #[error("triangulation is not uniform: {0}")]
    NonUniformMesh(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("point ({0}, {1}) lies outside element {2}")]
    PointOutsideElement(f64, f64, usize),
    #[error("empty mesh")]
    EmptyMesh,
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve inaccurate: relative residual {residual:e} exceeds {tolerance:e}")]
    InaccurateSolve { residual: f64, tolerance: f64 },
    #[error("eigensolver did not converge after {iterations} iterations; residuals {residuals:?}")]
    NotConverged {
        iterations: usize,
        residuals: Vec<f64>,
    },
    #[error("requested {requested} eigenpairs but the discrete divergence-free space has dimension {available}")]
    TooManyEigenpairs { requested: usize, available: usize },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("missing analytic derivatives: {0}")]
    MissingDerivatives(&'static str),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
