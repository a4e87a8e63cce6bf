use thiserror::Error;

/// Error type shared by all modules.
///
/// The CLI reports variants by [`Error::name`], so names are part of the
/// external interface and must stay stable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("interval at level {level} has no {tau}-generation ancestor within {headroom} super-root levels")]
    AncestorAboveRoot { level: i32, tau: u32, headroom: u32 },

    #[error("interval at level {level} is finer than the grid cells (level {cell_level})")]
    IntervalTooFine { level: i32, cell_level: i32 },

    #[error("interval (level {level}, index {index}) lies outside the function's domain")]
    OutsideDomain { level: i32, index: u64 },

    #[error("quantile s = {s} outside (0, {measure}]")]
    BadQuantile { s: f64, measure: f64 },

    #[error("expected depth {expected}, got {got}")]
    DepthMismatch { expected: u32, got: u32 },

    #[error("depth {depth} exceeds maximum {max}")]
    DepthTooLarge { depth: u32, max: u32 },

    #[error("depth {depth} below minimum {min}")]
    DepthTooSmall { depth: u32, min: u32 },

    #[error("coefficient bound violated: {0}")]
    AdmissibilityViolation(String),

    #[error("weight cell {index} has nonpositive value {value}")]
    NonpositiveWeight { index: usize, value: f64 },

    #[error("exponent {0} out of range")]
    BadExponent(f64),

    #[error("input function has zero norm")]
    ZeroFunction,

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u32, residual: f64 },

    #[error("domination denominator vanishes at cell {cell} with nonzero numerator")]
    DegenerateDomination { cell: usize },

    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("invalid dyadic interval: level {level}, index {index}")]
    InvalidInterval { level: i64, index: u64 },
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::AncestorAboveRoot { .. } => "AncestorAboveRoot",
            Error::IntervalTooFine { .. } => "IntervalTooFine",
            Error::OutsideDomain { .. } => "OutsideDomain",
            Error::BadQuantile { .. } => "BadQuantile",
            Error::DepthMismatch { .. } => "DepthMismatch",
            Error::DepthTooLarge { .. } => "DepthTooLarge",
            Error::DepthTooSmall { .. } => "DepthTooSmall",
            Error::AdmissibilityViolation(_) => "AdmissibilityViolation",
            Error::NonpositiveWeight { .. } => "NonpositiveWeight",
            Error::BadExponent(_) => "BadExponent",
            Error::ZeroFunction => "ZeroFunction",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DegenerateDomination { .. } => "DegenerateDomination",
            Error::InvalidStepFunction(_) => "InvalidStepFunction",
            Error::InvalidInterval { .. } => "InvalidInterval",
        }
    }

    /// True for errors raised by input validation rather than by a
    /// computation that started and failed.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. } | Error::DegenerateDomination { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
