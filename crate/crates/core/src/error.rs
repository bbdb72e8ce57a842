//! Shared error type for the solver library.

use crate::peakon::PeakonTrajectory;
use crate::semilinear::CharTrajectory;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFiniteInput,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grids are not aligned")]
    GridMismatch,

    #[error("xi-positivity violated")]
    XiPositivity,

    #[error("blowup at t = {t}")]
    PeakonBlowup { t: f64, partial: PeakonTrajectory },

    #[error("blowup at t = {t}")]
    CharBlowup { t: f64, partial: Box<CharTrajectory> },

    #[error("picard stalled (last residual {last:e})", last = residuals.last().copied().unwrap_or(f64::NAN))]
    PicardStalled { residuals: Vec<f64> },

    #[error("near-breaking: switch to characteristic solver (max |u_x| = {max_slope})")]
    NearBreaking { max_slope: f64 },

    #[error("time step {dt} exceeds stability limit {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },

    #[error("no collision detected")]
    NoCollision,

    #[error("energy inconsistency")]
    EnergyInconsistency,

    #[error("window [{y1}, {y2}] outside grid")]
    WindowOutsideGrid { y1: f64, y2: f64 },

    #[error("empty transport candidate set")]
    EmptyCandidateSet,

    #[error("test function violates C1 bound (sup {sup}, slope {slope})")]
    C1BoundViolated { sup: f64, slope: f64 },

    #[error("path needs at least 3 samples, got {got}")]
    PathTooShort { got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
