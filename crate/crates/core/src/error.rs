use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("cell counts must be positive, got {nx} x {ny}")]
    InvalidCount { nx: usize, ny: usize },
    #[error("degenerate domain: need at least three finite vertices enclosing positive area")]
    DegenerateDomain,
    #[error("domain polygon is not convex")]
    NonConvexDomain,
    #[error("uniform grids need an axis-aligned rectangular domain")]
    NotRectangle,
    #[error("mesh has no cells")]
    Empty,
    #[error("at least one Voronoi site is required")]
    NoSites,
    #[error("sites {0} and {1} coincide")]
    DuplicateSite(usize, usize),
    #[error("site {0} is not strictly inside the domain")]
    SiteOutsideDomain(usize),
    #[error("edge references cell {0}, which does not exist")]
    CellIndex(usize),
    #[error("mesh file: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("value {value} at cell {cell} is not finite")]
    NonFinite { cell: usize, value: f64 },
    #[error("fields live on different meshes")]
    MeshMismatch,
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("fractional order {0} outside (0, 1/2)")]
    Order(f64),
    #[error("time grids differ")]
    GridMismatch,
    #[error("need at least {needed} time steps, got {got}")]
    TooFewSteps { needed: usize, got: usize },
    #[error("initial data is not finite at ({x}, {y})")]
    InitialData { x: f64, y: f64 },
    #[error("the affine reconstruction is not piecewise constant in time")]
    NotPiecewiseConstant,
    #[error("field file: {0}")]
    Parse(String),
    #[error("fractional seminorm limited to {limit} cells, mesh has {cells}")]
    TooManyCells { cells: usize, limit: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("step count must be positive")]
    ZeroSteps,
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("coarsening factor {factor} does not divide {steps} steps")]
    Factor { factor: usize, steps: usize },
    #[error("noise parameter {0} is not finite")]
    Parameter(f64),
    #[error("path file: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dense oracle limited to {limit} unknowns, system has {size}")]
    TooLarge { size: usize, limit: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    Dimension { matrix: usize, vector: usize },
    #[error("mesh is not admissible:\n{0}")]
    Inadmissible(String),
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("Brownian path has {path_steps} steps over {path_horizon}, scheme expects {steps} over {horizon}")]
    PathMismatch {
        path_steps: usize,
        path_horizon: f64,
        steps: usize,
        horizon: f64,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("realization {index}: {source}")]
    Realization { index: usize, source: SolverError },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("levels are not nested: {0}")]
    NonNested(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}
