use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band plan: {0}")]
    BandPlan(String),

    #[error("invalid channel: {0}")]
    Cir(String),

    #[error("invalid distortion parameters: {0}")]
    Distortion(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("delay {delay_s:e} s falls outside [0, {max_s:e}) s")]
    DelayRange { delay_s: f64, max_s: f64 },

    #[error(
        "solver did not converge after {iterations} iterations \
         (primal residual {primal:e}, dual residual {dual:e})"
    )]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("no usable bands remain after cleaning")]
    NoUsableBands,

    #[error("dictionary has {active_rows} active rows, fewer than sparsity {sparsity}")]
    DegenerateDictionary { active_rows: usize, sparsity: usize },

    #[error("relative channel estimate predicts zero response on every carrier")]
    DegenerateEstimate,

    #[error("sparse solution has no significant tap")]
    NoSignificantTap,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
