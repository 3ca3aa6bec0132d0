//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenient result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures reported by geometry, flow, profile and synthesis operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {norm:.6} lies outside the validity ball of radius {radius}")]
    OutOfDomain { norm: f64, radius: f64 },

    #[error("non-finite value while evaluating {what}")]
    NonFinite { what: String },

    #[error("leading grazing form has {lines} zero lines; expected exactly one")]
    MultipleZeroLines { lines: usize },

    #[error("leading grazing form is degenerate: {0}")]
    DegenerateLeadingForm(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("integrator step size underflow at s = {s}")]
    StepFailure { s: f64 },

    #[error("start point is not on the boundary (|x1 - F| = {defect:e})")]
    NotOnBoundary { defect: f64 },

    #[error("order ambiguous at j = {j}: |H_p^j beta| = {value:e} is between zero threshold and noise floor")]
    AmbiguousOrder { j: usize, value: f64 },

    #[error("point is on the shadow side (<theta, grad F> = {g:e})")]
    ShadowSide { g: f64 },

    #[error("parameters outside the flow chart: {0}")]
    OutOfChart(String),

    #[error("grazing-degenerate point (xi_1^r = {xi1:e})")]
    GrazingDegenerate { xi1: f64 },

    #[error("inversion near the shadow boundary (|j| = {j:e})")]
    NearShadowBoundary { j: f64 },

    #[error("point is not in the image of the flow chart")]
    NotInImage,

    #[error("profile has non-zero theta mean ({mean:e})")]
    NonZeroMean { mean: f64 },

    #[error("transport coefficient singular on ray {ray}")]
    CoefficientSingular { ray: usize },

    #[error("Lipschitz bound violated: quotient {quotient:e} > K = {k:e}")]
    LipschitzViolation { quotient: f64, k: f64 },

    #[error("Picard iteration does not contract: {0}")]
    NoContraction(String),

    #[error("resonant division: |p(alpha . dphi)| = {p:e} below guard")]
    ResonantDivision { p: f64 },

    #[error("CFL condition violated: dt = {dt:e} exceeds {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("base point has glancing order {found}, expected {expected}")]
    WrongOrder { expected: String, found: String },

    #[error("wrong dimension: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("stencil unresolved: h = {h:e} > eps/10 = {limit:e}")]
    StencilUnresolved { h: f64, limit: f64 },

    #[error("grid of {cells} cells exceeds the budget of {budget}")]
    ResourceBudget { cells: usize, budget: usize },

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("missing stage output: {0}")]
    MissingDependency(String),

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
