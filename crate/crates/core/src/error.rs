use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("oracle returned a non-finite value")]
    NonFinite,
    #[error("unknown problem `{0}`")]
    UnknownProblem(alloc::string::String),
    #[error("invalid dimension {dim} for `{problem}` (minimum {min})")]
    InvalidDim { problem: &'static str, dim: usize, min: usize },
    #[error("objective has no value oracle")]
    MissingValueOracle,
    #[error("objective has no Hessian oracle")]
    MissingHessianOracle,
    #[error("finite-difference step must be positive")]
    DivisionByZero,
    #[error("dense eigensolver capped at dimension {cap}, got {dim}")]
    DimTooLargeForDenseOracle { dim: usize, cap: usize },
    #[error("Lanczos start vector is not unit length (norm {0})")]
    NonUnitStart(f64),
    #[error("failure probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("accuracy must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("point lies outside the trust region (norm {norm} > radius {radius})")]
    OutsideBall { norm: f64, radius: f64 },
    #[error("Super FISTA-G needs at least 2 iterations, got {0}")]
    IterBudgetTooSmall(usize),
    #[error("trust-region certificate failed after retry (residual {residual} > {delta})")]
    CertificateFailure { residual: f64, delta: f64 },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("Hessian-Lipschitz constant is zero; supply explicit hyperparameters")]
    ZeroL2,
    #[error("no estimate of f(x0) - f* available")]
    NoGapEstimate,
    #[error("gradient vanishes at the start point (norm {0})")]
    StationaryStart(f64),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(&'static str),
}
