use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("cutoff {cutoff} exceeds the largest alias-free cutoff {max} for grid resolution {resolution}")]
    CutoffTooLarge {
        cutoff: usize,
        max: usize,
        resolution: usize,
    },
    #[error("right-hand side has nonzero mean {0}")]
    NonZeroMean(f64),
    #[error("coefficient is not coercive: minimum grid value {0}")]
    NonCoercive(f64),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e}, tolerance {tolerance:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("mass mismatch between measures: {0:e}")]
    MassMismatch(f64),
    #[error("cost matrix of {0} entries exceeds the memory guard of {1}")]
    MemoryGuard(usize, usize),
    #[error("resolution guard violated: {0}")]
    Resolution(String),
    #[error("negative density value {0} on the grid")]
    NegativeDensity(f64),
    #[error("discretizations do not match: {0}")]
    Mismatch(String),
    #[error("positivity of the interpolated density failed at s = {s}: minimum {min}")]
    FlowPositivity { s: f64, min: f64 },
    #[error("atom budget {budget} exceeded: {atoms} atoms after coarsening")]
    Budget { budget: usize, atoms: usize },
    #[error("too few samples ({samples}) for {bins} histogram bins")]
    InsufficientSamples { samples: usize, bins: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
