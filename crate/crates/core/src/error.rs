use thiserror::Error;

/// Errors raised by field construction, derivations and time stepping.
#[derive(Debug, Error)]
pub enum WaveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field is not holomorphic: positive-frequency coefficient of size {leak:e}")]
    NotHolomorphic { leak: f64 },

    #[error("degenerate surface: min |1 + W_alpha| = {min_abs:.3e} below c_min = {c_min:.3e}")]
    DegenerateSurface { min_abs: f64, c_min: f64 },

    #[error("surface too steep: {0}")]
    SteepSurface(String),

    #[error("blow-up at t = {t}: {reason} (last good time {last_good_t})")]
    BlowUp {
        t: f64,
        last_good_t: f64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = WaveError> = std::result::Result<T, E>;
