use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown mode label '{0}'")]
    UnknownMode(String),

    #[error("invalid Fock space: {0}")]
    InvalidSpace(String),

    #[error("Fock space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("truncation too small: mode dimension {dim} < required {required} for |beta|^2 = {beta_sq}")]
    Truncation { dim: usize, required: usize, beta_sq: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model refused: {0}")]
    Regime(String),

    #[error("step size underflow at t = {t:e} (h = {h:e}) after {steps} steps")]
    StepSizeUnderflow { t: f64, h: f64, steps: usize },

    #[error("integration exceeded {max_steps} steps at t = {t:e}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("physicality violated at t = {t:e}: {what} = {value:e}")]
    Physicality { t: f64, what: &'static str, value: f64 },

    #[error("record too short: {0}")]
    RecordTooShort(String),

    #[error("Wigner grid error: {0}")]
    Grid(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("convergence rule failed: |dW_min| = {delta:e} >= {tol:e}")]
    Convergence { delta: f64, tol: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
