use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),
    #[error("cell {cell}: polygon is not simple")]
    NonSimplePolygon { cell: usize },
    #[error("cell {cell:?}: Gram matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularGram { cell: Option<usize>, condition: f64 },
    #[error("cell {cell}: projector system is singular")]
    SingularProjector { cell: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("order mismatch: element has order {element}, configuration expects {config}")]
    OrderMismatch { element: usize, config: usize },
    #[error("boundary edge {edge}: no sign change of the level set within the bracket [0, {bracket:.3e}]")]
    NoBracket { edge: usize, bracket: f64 },
    #[error("boundary edge {edge}: level-set gradient vanishes at the midpoint")]
    DegenerateGradient { edge: usize },
    #[error("matrix is numerically singular (pivot {pivot:?})")]
    SingularMatrix { pivot: Option<usize> },
    #[error("solve residual {residual:.3e} exceeds bound {bound:.1e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
    #[error("edge block {edge}: singular multiplier block")]
    SingularEdgeBlock { edge: usize },
    #[error("relative error undefined: exact solution has zero norm")]
    ZeroNorm,
    #[error("linear algebra backend: {0}")]
    Backend(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
