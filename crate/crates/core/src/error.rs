use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty momentum shell: sigma_ir={sigma} >= k_max={k_max}")]
    EmptyShell { sigma: f64, k_max: f64 },

    #[error("{what} must be at least 1")]
    ZeroCount { what: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("states or generators live on different mode grids")]
    GridMismatch,

    #[error("derivative order {0} not supported (max 4)")]
    DerivativeOrder(usize),

    #[error("time {t} outside the trajectory domain [{start}, {end}]")]
    OutsideDomain { t: f64, start: f64, end: f64 },

    #[error("time panel {panel:.3e} too coarse for trajectory scale {scale:.3e}: use step_count >= {required}")]
    Resolution { panel: f64, scale: f64, required: usize },

    #[error("photon cutoff {n_max} too small: truncated mass {mass:.3e} exceeds {bound:.1e}")]
    TailBound { n_max: usize, mass: f64, bound: f64 },

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("integration did not converge: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
