use thiserror::Error;

/// Every failure mode surfaced by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("overflow guard: dense {n}x{n} allocation needs {bytes} bytes, cap is {cap}")]
    OverflowGuard { n: usize, bytes: u128, cap: u128 },

    #[error("insufficient trials: got {got}, need at least {need}")]
    InsufficientTrials { got: usize, need: usize },

    #[error("eigensolver did not converge at index {index} (residual {residual:e})")]
    NoConvergence { index: usize, residual: f64 },

    #[error("spectrum accuracy gate failed: {0}")]
    AccuracyGate(String),

    #[error("branch ambiguity at z = {re}+{im}i")]
    BranchAmbiguity { re: f64, im: f64 },

    #[error("z = {0} lies on the support of the law")]
    OffSupportViolation(f64),

    #[error("edge bracket failure: no sign change in [{lo}, {hi}]")]
    EdgeBracketFailure { lo: f64, hi: f64 },

    #[error("cross-check failure: {0}")]
    CrossCheckFailure(String),

    #[error("non-finite integrand at x = {0}")]
    NonFiniteIntegrand(f64),

    #[error("domain violation: z = {z} must exceed the largest eigenvalue {lambda_1}")]
    DomainViolation { z: f64, lambda_1: f64 },

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonconvergence(String),

    #[error("beta = {beta} is within {band:e} of beta_c = {beta_c}")]
    NearCritical { beta: f64, beta_c: f64, band: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate sample: all values equal")]
    DegenerateSample,

    #[error("experiment aborted: {failed} of {total} trials failed")]
    ExperimentAborted { failed: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
