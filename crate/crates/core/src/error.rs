use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a length space surrogate: graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("edge {from}-{to} has nonpositive length {length}")]
    NonpositiveEdge { from: String, to: String, length: f64 },

    #[error("unknown point id `{0}`")]
    UnknownPoint(String),

    #[error("point index {index} out of range for a space with {len} points")]
    PointOutOfRange { index: usize, len: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measures must be supported in supp(nu)")]
    SupportViolation,

    #[error("transport LP did not converge after {iterations} pivots (most negative reduced cost {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("support too large for brute-force enumeration: {size} > {max}")]
    SupportTooLarge { size: usize, max: usize },

    #[error("entropy function is not in DC_{n}: witness r in [{lo:e}, {hi:e}]")]
    NotInClass { n: f64, lo: f64, hi: f64 },

    #[error("entropy function `{0}` has no closed-form second derivative")]
    NoSecondDerivative(String),

    #[error("measure is not absolutely continuous with respect to the reference measure")]
    NotAbsolutelyContinuous,

    #[error("density vanishes at point {0} inside supp(nu)")]
    VanishingDensity(usize),

    #[error("potential exceeds U'(inf) = {bound} at point {point}")]
    PotentialTooLarge { point: usize, bound: f64 },

    #[error("group generator {index} is not an isometry preserving nu: {reason}")]
    BadGenerator { index: usize, reason: String },

    #[error("invalid Gromov-Hausdorff map: {0}")]
    InvalidGhMap(String),

    #[error("use discrete solver: quantile transport needs interval topology")]
    CircleTopology,

    #[error("zero-energy potential: geodesic is trivial")]
    ZeroEnergy,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {error}")]
    File { path: String, error: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
