use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid group description: {0}")]
    InvalidGroup(String),

    #[error("norm `{norm}` is not defined on this group: {reason}")]
    IncompatibleNorm { norm: String, reason: String },

    #[error("horizontal index {index} out of range (m1 = {m1})")]
    HorizontalIndex { index: usize, m1: usize },

    #[error("point too close to the origin for a finite-difference gradient (N(x) = {norm_value:e}, step = {step:e})")]
    TooCloseToOrigin { norm_value: f64, step: f64 },

    #[error("gradient undefined at the origin")]
    GradientAtOrigin,

    #[error("field has no gradient (indicator field)")]
    NoGradient,

    #[error("field has unbounded support; a compact support box is required")]
    UnboundedSupport,

    #[error("non-finite integrand value {value} at {location:?}")]
    NonFinite { value: f64, location: Vec<f64> },

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("empty restricted mass on [{lo}, {hi}]")]
    EmptyMass { lo: f64, hi: f64 },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
