use thiserror::Error;

/// Every failure the numerical layer can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of range: {reason}")]
    Param { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("mean along periodic axis is {mean:e} (sup norm {scale:e}); data is not in the zero-mean class")]
    NonzeroMean { mean: f64, scale: f64 },

    #[error("non-finite value; last good {variable} = {last_good}")]
    NonFinite { variable: &'static str, last_good: f64 },

    #[error("blow-up detected: sup norm grew past {factor}x its initial value; last good {variable} = {last_good}")]
    BlowUp { variable: &'static str, last_good: f64, factor: f64 },

    #[error("step {dt:e} exceeds stability bound {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-positive density {value:e} (at {variable} = {at})")]
    NonPositiveDensity { value: f64, variable: &'static str, at: f64 },

    #[error("profile coordinate {coordinate} = {value} outside solved range [{lo}, {hi}]")]
    DomainExceeded { coordinate: &'static str, value: f64, lo: f64, hi: f64 },

    #[error("cone is empty at t = {t} (apex at t = {apex})")]
    EmptyCone { t: f64, apex: f64 },

    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientSnapshots { needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("successive errors are not decreasing: {0:?}")]
    NonMonotoneErrors(Vec<f64>),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Last good value of the evolution variable for march failures, if any.
    pub fn last_good(&self) -> Option<f64> {
        match self {
            Error::NonFinite { last_good, .. } | Error::BlowUp { last_good, .. } => Some(*last_good),
            Error::NonPositiveDensity { at, .. } => Some(*at),
            _ => None,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::BlowUp { .. }
                | Error::NonPositiveDensity { .. }
                | Error::CflViolation { .. }
                | Error::DomainExceeded { .. }
                | Error::EmptyCone { .. }
                | Error::NonMonotoneErrors(_)
        )
    }
}
