use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("support points are not commensurable on a lattice with at most 2^24 cells")]
    NonCommensurableSupport,
    #[error("negative probability mass {0}")]
    NegativeMass(f64),
    #[error("distribution has no positive mass")]
    EmptySupport,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("cumulant order {0} exceeds the supported maximum of 32")]
    OrderTooHigh(usize),
    #[error("result support of {0} cells exceeds the 2^24 cap")]
    SupportOverflow(usize),
    #[error("conditioning on a sum point with mass {0:e} below the 1e-14 floor")]
    ZeroMassCondition(f64),
    #[error("|z|·tau = {0} is outside the analyticity domain (must be < 1)")]
    OutOfDomain(f64),
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("distribution is not centered (mean {0:e})")]
    NotCentered(f64),
    #[error("variance is degenerate (zero)")]
    DegenerateVariance,
    #[error("number of leaves {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("gaussian variance {expected} does not match law variance {actual}")]
    VarianceMismatch { expected: f64, actual: f64 },
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
    #[error("time step {dt} is too coarse (must be at most {max})")]
    StepTooCoarse { dt: f64, max: f64 },
    #[error("paths have mismatched lengths")]
    LengthMismatch,
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("union support of {0} points is too large for brute force (max 20)")]
    SupportTooLargeForBruteForce(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate tau: {0}")]
    DegenerateTau(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Json(_) | Error::Csv(_) | Error::Io(_) | Error::NotPowerOfTwo(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
