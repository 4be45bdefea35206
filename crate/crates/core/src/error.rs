use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state contains non-finite entries")]
    NonFiniteState,

    #[error("state violates hermiticity/population invariant: {0}")]
    InvalidState(String),

    #[error("spin has no relaxation channel (eta_s + gamma_s(1+2n_th) = 0)")]
    UndampedSpin,

    #[error("unphysical collective spin: J^2 radicand {radicand:e} for N = {n_spins:e}")]
    UnphysicalState { radicand: f64, n_spins: f64 },

    #[error(transparent)]
    Integration(#[from] IntegrationError),

    #[error("Hilbert space dimension {dim} exceeds guard {max}")]
    DimensionGuard { dim: usize, max: usize },

    #[error("expected exactly two spectral peaks, found {0}")]
    PeakCount(usize),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("config error{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("refusing to overwrite existing file {0} (pass --force)")]
    WouldOverwrite(std::path::PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationFailure {
    StepUnderflow,
    MaxStepsExceeded,
    NonFinite,
    Diverged,
}

/// Integration failure carrying the last accepted state.
#[derive(Debug, Clone, Error)]
#[error("integration failed ({kind:?}) at t = {time:e} s after {steps} steps")]
pub struct IntegrationError {
    pub kind: IntegrationFailure,
    pub time: f64,
    pub steps: usize,
    pub last_state: Vec<Complex64>,
}
