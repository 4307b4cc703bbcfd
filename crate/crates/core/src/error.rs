use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix entries must be finite (non-finite value at ({row}, {col}))")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not numerically diagonalizable (eigenvector condition estimate {cond:.3e})")]
    NonDiagonalizable { cond: f64 },

    #[error("function undefined at {at}")]
    FunctionUndefined { at: Complex64 },

    #[error("pole hit at x = {x}, y = {y} (|denominator| = {magnitude:.3e})")]
    PoleHit {
        x: Complex64,
        y: Complex64,
        magnitude: f64,
    },

    #[error("singular Sylvester pencil: alpha + lambda + mu = {value} for some eigenvalue pair")]
    SingularPencil { value: Complex64 },

    #[error("scalar function `{0}` has no derivative")]
    MissingDerivative(String),

    #[error("Krylov start vector is zero")]
    ZeroStartVector,

    #[error("requested Krylov dimension {requested} exceeds operator dimension {dimension}")]
    DimensionExceeded { requested: usize, dimension: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("singularity {0} lies inside the interval")]
    SingularityInsideInterval(Complex64),

    #[error("degree {k} is outside the admissible regime (k must be >= {min:.4})")]
    OutOfRegime { k: usize, min: f64 },

    #[error("evaluation failure: {0}")]
    EvaluationFailure(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
