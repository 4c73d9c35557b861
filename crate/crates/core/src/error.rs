use thiserror::Error;

pub type Result<T> = std::result::Result<T, CollapseError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollapseError {
    #[error("grid too coarse: width {width:e} m is below 4 grid spacings ({min:e} m)")]
    GridTooCoarse { width: f64, min: f64 },

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("time step must be positive, got {0:e}")]
    NonPositiveStep(f64),

    #[error("time step too large: {0}")]
    StepTooLarge(String),

    #[error("probability {probability:e} reached the outer grid band at t = {time:e} s")]
    AbsorbedAtBoundary { probability: f64, time: f64 },

    #[error("rate must be non-negative, got {0:e}")]
    NegativeRate(f64),

    #[error("collapse posterior is numerically empty (weight {0:e})")]
    EmptyPosterior(f64),

    #[error("number of constituents must be at least 1")]
    ZeroConstituents,

    #[error("fitted decay rate {0:e} is not positive")]
    NonDecaying(f64),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("energy must be non-negative, got {0:e}")]
    NegativeEnergy(f64),

    #[error("superposition of point masses has divergent self-energy")]
    SingularSelfEnergy,

    #[error("no exclusion: visibility stays above the floor for every rate up to {0:e} s^-1")]
    NoExclusion(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("config invalid at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl CollapseError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        CollapseError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the `collapse-lab` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            CollapseError::ConfigInvalid { .. } => 2,
            CollapseError::Io(_) => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for CollapseError {
    fn from(e: std::io::Error) -> Self {
        CollapseError::Io(e.to_string())
    }
}
