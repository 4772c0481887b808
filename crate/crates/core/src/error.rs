use alloc::string::String;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("axis {axis}: size {size} is not a power of two >= 8")]
    BadGridSize { axis: usize, size: usize },
    #[error("axis {axis}: half-width {width} must be positive and finite")]
    BadHalfWidth { axis: usize, width: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("fields live on different grids or at different hbar")]
    GridMismatch,
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("aliasing: {fraction:.3e} relative mass at the Nyquist shell ({context})")]
    Aliasing { fraction: f64, context: String },
    #[error("mass {fraction:.3e} reaches the box boundary ({context})")]
    BoxEscape { fraction: f64, context: String },
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("invalid hbar schedule: {0}")]
    Schedule(String),
    #[error("precondition failed: {what} = {magnitude:.3e}")]
    Precondition { what: String, magnitude: f64 },
    #[error("matrix is not symplectic (defect {defect:.3e})")]
    NotSymplectic { defect: f64 },
    #[error("singular block: {0}")]
    Singular(String),
    #[error("parse error at {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("Poisson bracket {{Re H, Im H}} = {value:.3e} is not negative")]
    NonNegativeBracket { value: f64 },
    #[error("residual did not decrease at iteration {iteration} (ratio {ratio:.3e})")]
    ResidualNotDecreasing { iteration: usize, ratio: f64 },
    #[error("orbit does not close: distance {distance:.3e} after one period")]
    NotPeriodic { distance: f64 },
    #[error("energy drift {drift:.3e} exceeds tolerance")]
    EnergyDrift { drift: f64 },
    #[error("state carries no profile stack")]
    MissingStack,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
