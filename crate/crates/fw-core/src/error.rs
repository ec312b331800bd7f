use thiserror::Error;

/// Errors shared by the numerical modules.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("position {x} outside the admissible range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("CFL violation: dt = {dt:.6e} exceeds the stable bound {bound:.6e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("two-sided derivative queried at the kink x = {0}; pass an explicit side")]
    KinkSide(f64),

    #[error("numerical failure at step {step}, t = {t:.6e}: {what}")]
    Numerics { step: usize, t: f64, what: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
