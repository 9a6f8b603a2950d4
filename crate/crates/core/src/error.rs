use thiserror::Error;

/// Errors produced by the numerical and symbolic engines.
#[derive(Debug, Error)]
pub enum ConeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("metric is singular at {point}: {reason}")]
    SingularPoint { point: String, reason: String },

    #[error("metric not positive definite at {point} (smallest eigenvalue {min_eigenvalue:e})")]
    PositivityViolation { point: String, min_eigenvalue: f64 },

    #[error("weight derivative of order {order} requested; at most 4 are supported")]
    DerivativeOrder { order: usize },

    #[error("dominant term does not dominate: {0}")]
    DominationFailure(String),

    #[error("missing value for symbol {0}")]
    MissingTag(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("newton: positivity could not be restored after {halvings} step halvings (iteration {iteration})")]
    PositivityUnrecoverable { iteration: usize, halvings: usize },

    #[error("newton: no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("source overflow: sup f = {0} exceeds 700")]
    Overflow(f64),

    #[error("frame diagonalization failed at grid point {0}")]
    FrameFailure(usize),

    #[error("input is not plurisubharmonic at grid point {0}")]
    NotPsh(usize),

    #[error("solve failed at epsilon = {eps}: {source}")]
    AtEpsilon {
        eps: f64,
        #[source]
        source: Box<ConeError>,
    },

    #[error("unknown catalog entry {kind} '{name}'")]
    UnknownCatalog { kind: &'static str, name: String },

    #[error("config: {0}")]
    Config(String),

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ConeError>;
