use thiserror::Error;

/// Every failure the solver stack can report.
#[derive(Debug, Error)]
pub enum VemError {
    #[error("cell {cell}: polygon is not simple ({reason})")]
    NonSimplePolygon { cell: usize, reason: &'static str },

    #[error("edge ({a}, {b}) is shared inconsistently between cells")]
    InconsistentSharedEdge { a: usize, b: usize },

    #[error("boundary edge ({a}, {b}) was classified as interior")]
    UntaggedBoundaryEdge { a: usize, b: usize },

    #[error("unsupported mesh family `{0}`")]
    UnsupportedFamily(String),

    #[error("cell {cell} is not convex and cannot be refined")]
    NonConvexCell { cell: usize },

    #[error("refinement requested with an empty marked set")]
    EmptyMarking,

    #[error("cell {cell}: no interior point is visible from every vertex")]
    CentroidOutsideKernel { cell: usize },

    #[error("{space}: order {order} is below the minimum {min}")]
    OrderTooLow {
        space: &'static str,
        order: usize,
        min: usize,
    },

    #[error("cell {cell}: singular local system while building {what}")]
    SingularLocalSystem { cell: usize, what: &'static str },

    #[error("cell {cell}: inverse mobility is not symmetric positive definite")]
    CoefficientNotSpd { cell: usize },

    #[error("mobility singular at ({x}, {y}): stress trace {trace:e}")]
    CoefficientSingular { x: f64, y: f64, trace: f64 },

    #[error("dof mismatch: {0}")]
    DofMismatch(String),

    #[error("singular global system")]
    SingularSystem,

    #[error("linear solve residual {residual:e} exceeds tolerance")]
    ResidualTooLarge { residual: f64 },

    #[error("Picard iteration diverged at iteration {iteration}")]
    PicardDiverged { iteration: usize },

    #[error("Picard iteration did not converge in {iterations} iterations")]
    MaxIterations { iterations: usize },

    #[error("cell {cell}: edge {edge} has no neighbour across it")]
    MissingNeighbor { cell: usize, edge: usize },

    #[error("the problem carries no exact solution")]
    MissingExactSolution,

    #[error("true error is zero; effectivity undefined")]
    ZeroError,

    #[error("convergence rate needs positive quantities, got {0:e}")]
    NonPositiveQuantity(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh file line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = VemError> = std::result::Result<T, E>;
