use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("point ({x}, {y}) is not contained in element {element}")]
    PointNotInElement { element: usize, x: f64, y: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("no quadrature rule of degree {0} (supported: 1..=8)")]
    UnsupportedDegree(usize),

    #[error("expected a field of kind {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("iterative solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("singular saddle-point system: {0}")]
    SingularSystem(String),

    #[error("{name} = {value} violates its bounds at ({x}, {y})")]
    CoefficientOutOfBounds {
        name: &'static str,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error("error entry {index} is not positive ({value})")]
    NonPositiveError { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("manufactured problem `{problem}` failed the residual check: {detail}")]
    ResidualGate { problem: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short identifier used in machine-readable failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PointOutsideDomain { .. } => "point_outside_domain",
            Error::PointNotInElement { .. } => "point_not_in_element",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::UnsupportedDegree(_) => "unsupported_degree",
            Error::KindMismatch { .. } => "kind_mismatch",
            Error::NotConverged { .. } => "not_converged",
            Error::SingularSystem(_) => "singular_system",
            Error::CoefficientOutOfBounds { .. } => "coefficient_out_of_bounds",
            Error::NonPositiveError { .. } => "non_positive_error",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UnknownProblem(_) => "unknown_problem",
            Error::ResidualGate { .. } => "residual_gate",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
