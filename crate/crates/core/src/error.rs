use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("empty-condition: conditioning set has zero mass")]
    EmptyCondition,

    #[error("category-count mismatch: {left} vs {right}")]
    CategoryMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("nonpositive-probability: {0}")]
    NonpositiveProbability(f64),

    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible-gap: eta = {0} must be positive")]
    InfeasibleGap(f64),

    #[error("empty-retained: no samples outside the leftover bucket on the {0} side")]
    EmptyRetained(&'static str),

    #[error("config violates constraints: {}", .0.join("; "))]
    ConfigViolation(Vec<String>),

    #[error("untokenizable input at byte {0}")]
    Untokenizable(usize),

    #[error("unknown token id {0}")]
    UnknownToken(u32),

    #[error("oracle-intractable: {0}")]
    OracleIntractable(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
