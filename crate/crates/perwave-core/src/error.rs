use thiserror::Error;

/// Errors surfaced by the wave-construction and spectral machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("parameter `{name}` out of range: {value}")]
    BadParameter { name: String, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid too short for the requested construction: {0}")]
    GridTooShort(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Newton did not converge after {iterations} iterations (last residual {last_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },
    #[error("Jacobian numerically singular (sigma_min = {sigma_min:.3e})")]
    SingularJacobian { sigma_min: f64 },
    #[error("boundary data inconsistent: {0}")]
    BoundaryInconsistent(String),
    #[error("continuation stalled at parameter value {param_value}")]
    ContinuationStalled { param_value: f64 },

    #[error("matching condition violated between fronts {left} and {right} (distance {distance:.3e})")]
    MatchingConditionViolated {
        left: usize,
        right: usize,
        distance: f64,
    },
    #[error("primary profile is not a pulse: end states differ by {0:.3e}")]
    NotAPulse(f64),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("ODE integration failed: step size underflow at x = {x}")]
    IntegrationFailure { x: f64 },
    #[error("spectral point is not hyperbolic (unit-circle distance {0:.3e})")]
    NonHyperbolic(f64),
    #[error("projected reference frame is rank deficient (sigma_min = {0:.3e})")]
    ReferenceDegenerate(f64),
    #[error("lambda lies in the essential spectrum of an end state")]
    EssentialSpectrum,
    #[error("Morse indices do not match: l- = {l_minus}, l+ = {l_plus}")]
    IndexMismatch { l_minus: usize, l_plus: usize },
    #[error("profile is not periodic")]
    NotPeriodicProfile,

    #[error("Evans function vanishes on the contour (min |E| = {min_abs:.3e})")]
    RootOnContour { min_abs: f64 },
    #[error("contour refinement exceeded {0} samples")]
    MaxRefinementExceeded(usize),

    #[error("problem too large for the dense oracle: {0} unknowns (cap {1})")]
    TooLarge(usize, usize),
    #[error("LDL^T breakdown: shift {0} appears to be an eigenvalue")]
    BreakdownAtShift(f64),
    #[error("adjoint kernel is not one-dimensional")]
    AdjointKernelNotOneDimensional,
    #[error("L+ is singular on the requested domain")]
    LPlusSingular,

    #[error("projections are too far apart to paste: |P - Q| = {0:.3e} >= 1")]
    ProjectionsTooFar(f64),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
