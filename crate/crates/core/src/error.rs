use thiserror::Error;

/// Violations of the `(N, r)` admissibility constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SpectrumError {
    #[error("N must be at least 1 (got {0})")]
    NNonPositive(i64),
    #[error("r must be odd (got {0})")]
    RNotOdd(i64),
    #[error("r must satisfy 1 <= r <= 2N-1 (got r={r}, N={n})")]
    ROutOfRange { r: i64, n: i64 },
    #[error("r and N must be coprime (gcd({r}, {n}) = {gcd})")]
    NotCoprime { r: i64, n: i64, gcd: i64 },
}

impl SpectrumError {
    /// Stable machine-readable name of the violated constraint.
    pub fn code(&self) -> &'static str {
        match self {
            SpectrumError::NNonPositive(_) => "NNonPositive",
            SpectrumError::RNotOdd(_) => "RNotOdd",
            SpectrumError::ROutOfRange { .. } => "ROutOfRange",
            SpectrumError::NotCoprime { .. } => "NotCoprime",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("sampled functions live on different grids")]
    GridMismatch,
    #[error("grid step is not aligned: {0}")]
    StepNotAligned(String),
    #[error("sampled mask queried off its grid at xi = {0}")]
    UnalignedQuery(f64),
    #[error("lower Riesz bound is zero (min periodization {0:e})")]
    LowerBoundZero(f64),
    #[error("expected {expected} masks per side, got {got}")]
    WrongChannelCount { expected: usize, got: usize },
    #[error("lowpass mask is not normalized: |m0(0) - 1| = {0:e}")]
    NotNormalized(f64),
    #[error("decay fit range carries no nonzero samples")]
    DegenerateTail,
    #[error("decay fit needs omega >= {needed} (got {got})")]
    FitRangeTooShort { needed: f64, got: f64 },
    #[error("signal has zero norm")]
    ZeroSignal,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Spectrum(e) => e.code(),
            Error::GridMismatch => "GridMismatch",
            Error::StepNotAligned(_) => "StepNotAligned",
            Error::UnalignedQuery(_) => "UnalignedQuery",
            Error::LowerBoundZero(_) => "LowerBoundZero",
            Error::WrongChannelCount { .. } => "WrongChannelCount",
            Error::NotNormalized(_) => "NotNormalized",
            Error::DegenerateTail => "DegenerateTail",
            Error::FitRangeTooShort { .. } => "FitRangeTooShort",
            Error::ZeroSignal => "ZeroSignal",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }

    /// Process exit status for operational failures: 2 invalid spectrum,
    /// 3 unreadable input or output, 4 grid alignment, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spectrum(_) => 2,
            Error::Io(_) | Error::Parse(_) | Error::WrongChannelCount { .. } => 3,
            Error::GridMismatch | Error::StepNotAligned(_) | Error::UnalignedQuery(_) => 4,
            _ => 1,
        }
    }
}
