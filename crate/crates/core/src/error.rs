use thiserror::Error;

/// Errors raised by the mixed finite element library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("triangle {triangle} is degenerate or clockwise (signed area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConformingInput(usize, usize),

    #[error("subdomain interface cuts through triangle {0}")]
    InterfaceViolation(usize),

    #[error("invalid mesh input: {0}")]
    InvalidMesh(String),

    #[error("unsupported degree {degree} for {space}")]
    UnsupportedDegree { space: String, degree: usize },

    #[error("unsupported quadrature order {0} (supported: 1..=20)")]
    UnsupportedOrder(usize),

    #[error("coefficient must be positive, got {0}")]
    NonPositiveCoefficient(f64),

    #[error("no coefficient given for subdomain {0}")]
    MissingSubdomain(usize),

    #[error("{flux} x D_{potential} is not a stable pair")]
    UnstablePair { flux: String, potential: usize },

    #[error("saddle-point system is singular: {0}")]
    SingularSystem(String),

    #[error("iterative solver did not converge: {0}")]
    NoConvergence(String),

    #[error("local post-processing system on triangle {0} is singular")]
    LocalSingularSystem(usize),

    #[error("eigenvalue solve failed: {0}")]
    EigenSolveFailure(String),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),

    #[error("root finding failed: {0}")]
    RootFindFailure(String),

    #[error("error values must be positive, got {0}")]
    NonPositiveError(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Variant name, for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateTriangle { .. } => "DegenerateTriangle",
            Error::NonConformingInput(..) => "NonConformingInput",
            Error::InterfaceViolation(_) => "InterfaceViolation",
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::UnsupportedDegree { .. } => "UnsupportedDegree",
            Error::UnsupportedOrder(_) => "UnsupportedOrder",
            Error::NonPositiveCoefficient(_) => "NonPositiveCoefficient",
            Error::MissingSubdomain(_) => "MissingSubdomain",
            Error::UnstablePair { .. } => "UnstablePair",
            Error::SingularSystem(_) => "SingularSystem",
            Error::NoConvergence(_) => "NoConvergence",
            Error::LocalSingularSystem(_) => "LocalSingularSystem",
            Error::EigenSolveFailure(_) => "EigenSolveFailure",
            Error::UnknownProblem(_) => "UnknownProblem",
            Error::InvalidParams(_) => "InvalidParams",
            Error::RootFindFailure(_) => "RootFindFailure",
            Error::NonPositiveError(_) => "NonPositiveError",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Parse(_) => "Parse",
        }
    }
}
