use thiserror::Error;

/// Machine-readable error codes; the leading token of each message is stable
/// and is what the CLI reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("OVERLAP: element {0} appears in more than one block")]
    Overlap(usize),
    #[error("MISSING_ELEMENT: element {0} is not covered by any block")]
    MissingElement(usize),
    #[error("EMPTY_BLOCK: blocks must be non-empty")]
    EmptyBlock,
    #[error("BAD_RANGE: size {m} out of range 1..={n}")]
    BadRange { m: usize, n: usize },
    #[error("NOT_INJECTIVE: value {0} is hit twice")]
    NotInjective(usize),
    #[error("RANGE: value {value} outside 1..={n}")]
    Range { value: usize, n: usize },
    #[error("SIZE_MISMATCH: ground-set sizes differ ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("NOT_NESTED: zeta is not finer than xi")]
    NotNested,
    #[error("TOO_LARGE: n={n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("NEGATIVE: {0}")]
    Negative(String),
    #[error("SUM_EXCEEDS_ONE: total mass {0} > 1")]
    SumExceedsOne(f64),
    #[error("ROW_SUM_EXCEEDS_BAR: {0}")]
    RowSumExceedsBar(String),
    #[error("TOTAL_EXCEEDS_ONE: u_bar + sum(s_bar) = {0} > 1")]
    TotalExceedsOne(f64),
    #[error("NOT_BINARY: {0}")]
    NotBinary(String),
    #[error("BAD_PARAMS: {0}")]
    BadParams(String),
    #[error("HORIZON_NONPOSITIVE: horizon must be positive, got {0}")]
    HorizonNonpositive(f64),
    #[error("PARSE: {0}")]
    Parse(String),
    #[error("IO: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// Stable code token (the part before the first ':').
    pub fn code(&self) -> &'static str {
        match self {
            Error::Overlap(_) => "OVERLAP",
            Error::MissingElement(_) => "MISSING_ELEMENT",
            Error::EmptyBlock => "EMPTY_BLOCK",
            Error::BadRange { .. } => "BAD_RANGE",
            Error::NotInjective(_) => "NOT_INJECTIVE",
            Error::Range { .. } => "RANGE",
            Error::SizeMismatch(..) => "SIZE_MISMATCH",
            Error::NotNested => "NOT_NESTED",
            Error::TooLarge { .. } => "TOO_LARGE",
            Error::Negative(_) => "NEGATIVE",
            Error::SumExceedsOne(_) => "SUM_EXCEEDS_ONE",
            Error::RowSumExceedsBar(_) => "ROW_SUM_EXCEEDS_BAR",
            Error::TotalExceedsOne(_) => "TOTAL_EXCEEDS_ONE",
            Error::NotBinary(_) => "NOT_BINARY",
            Error::BadParams(_) => "BAD_PARAMS",
            Error::HorizonNonpositive(_) => "HORIZON_NONPOSITIVE",
            Error::Parse(_) => "PARSE",
            Error::Io(_) => "IO",
        }
    }
}
