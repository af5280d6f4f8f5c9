use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PwsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset `{0}` (expected one of tangential, nontangential, spiral, ambiguous)")]
    UnknownPreset(String),

    #[error("degenerate sliding: the normal projections of both fields coincide")]
    DegenerateSliding,

    #[error("no sliding: both fields cross the surface in the same direction")]
    NoSliding,

    #[error("no root of the bilinear system in the unit square")]
    NoEquilibrium,

    #[error("ambiguous bilinear system: {} roots in the unit square: {roots:?}", roots.len())]
    Ambiguous { roots: Vec<(f64, f64)> },

    #[error("singular moments system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("point ({alpha}, {beta}) is not an equilibrium of the fast system (residual {residual:e})")]
    NotAnEquilibrium { alpha: f64, beta: f64, residual: f64 },

    #[error("non-generic point: several exit mechanisms coincide: {0:?}")]
    NonGenericPoint(Vec<String>),

    #[error("regularization needs canonical surfaces h1 = x1, h2 = x2")]
    UnsupportedGeometry,

    #[error("step size underflow at t = {t} (h = {h:e}); the problem looks stiff")]
    StiffnessSuspected { t: f64, h: f64 },

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, PwsError>;
