use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum FlepError {
    #[error("non-finite field")]
    NonFinite,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("non-real output (imaginary residue {residue:.3e})")]
    NonReal { residue: f64 },
    #[error("trivial fixed point")]
    TrivialFixedPoint,
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("moment diverges: {0}")]
    MomentDiverges(String),
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("{assumption}: {message}")]
    Assumption {
        assumption: &'static str,
        message: String,
    },
    #[error("energy unbounded (energy {energy:.6e} after {steps} steps)")]
    EnergyUnbounded { energy: f64, steps: usize },
    #[error("max steps reached ({steps}) with residual {residual:.3e}")]
    MaxSteps {
        steps: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("not a critical point (multiplier mismatch {mismatch:.3e})")]
    NotCriticalPoint { mismatch: f64 },
    #[error("no concentration")]
    NoConcentration,
    #[error("insufficient resolution for fit ({resolved} resolved rows)")]
    InsufficientResolution { resolved: usize },
    #[error("bad field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FlepError>;
