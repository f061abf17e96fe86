use thiserror::Error;

/// Errors produced by the simulator and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angular momentum {0}: expected a non-negative half-integer")]
    NotHalfInteger(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular optical resolvent at transition ({row}, {col})")]
    SingularResolvent { row: usize, col: usize },

    #[error("excited-state solve failed: residual {residual:.3e} exceeds {tolerance:.1e}")]
    ExcitedSolve { residual: f64, tolerance: f64 },

    #[error("density-matrix invariant violated at t = {time:.6e} s: {detail}")]
    InvariantViolation { time: f64, detail: String },

    #[error("step size underflow at t = {time:.6e} s (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("no steady state within t_max = {t_max:.3e} s (last M = {last_m:.6e})")]
    NotConverged { t_max: f64, last_m: f64 },

    #[error("no transition detected: {0}")]
    NoTransition(String),

    #[error("fit did not converge in stage {stage}: {detail}")]
    FitFailed { stage: u8, detail: String },

    #[error("point is in the ordered phase (spontaneous M = {0:.4e}); susceptibility undefined")]
    OrderedPhase(f64),

    #[error("config error at `{path}`: {detail}")]
    Config { path: String, detail: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            detail: detail.into(),
        }
    }
}

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const NOT_CONVERGED: i32 = 5;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotHalfInteger(_) | Error::InvalidArgument(_) | Error::Config { .. } => exit::CONFIG,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Schema(_) => exit::IO,
            Error::NotConverged { .. } | Error::NoTransition(_) => exit::NOT_CONVERGED,
            Error::SingularResolvent { .. }
            | Error::ExcitedSolve { .. }
            | Error::InvariantViolation { .. }
            | Error::StepUnderflow { .. }
            | Error::FitFailed { .. }
            | Error::OrderedPhase(_) => exit::NUMERICAL,
        }
    }
}
