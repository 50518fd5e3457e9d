use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative concentration for species {0}")]
    NegativeConcentration(usize),
    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),
    #[error("measure is not evaluable at state {0:?}")]
    MeasureNotEvaluable(Vec<i64>),
    #[error("integer overflow during exact rank computation")]
    Overflow,
    #[error("deficiency cross-check failed: m - l - s = {combinatorial}, dim ker = {kernel}")]
    DeficiencyMismatch { combinatorial: i64, kernel: i64 },
    #[error("state {state:?} does not dominate complex {complex:?}")]
    NotDominating { state: Vec<i64>, complex: Vec<i64> },
    #[error("copy image leaves the non-negative orthant: {0:?}")]
    NegativeImage(Vec<i64>),
    #[error("empty state set")]
    EmptyStateSet,
    #[error("class {0} is not closed")]
    ClassNotClosed(usize),
    #[error("stationary solve failed, residual {0:e}")]
    SolveFailed(f64),
    #[error("rate overflow at state {0:?}")]
    RateOverflow(Vec<i64>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A DSL error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    DuplicateReaction(String),
    SelfLoop(String),
    NonPositiveRate(String),
    UnknownTheta(String),
    UnknownSpecies(String),
    CoefficientTooLarge(u64),
    RateCount { expected: usize, got: usize },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::DuplicateReaction(r) => write!(f, "duplicate reaction {r}"),
            ParseErrorKind::SelfLoop(c) => write!(f, "self-loop reaction {c} -> {c}"),
            ParseErrorKind::NonPositiveRate(v) => write!(f, "rate constant must be positive, got {v}"),
            ParseErrorKind::UnknownTheta(name) => write!(f, "unknown theta function '{name}'"),
            ParseErrorKind::UnknownSpecies(name) => write!(f, "unknown species '{name}'"),
            ParseErrorKind::CoefficientTooLarge(v) => {
                write!(f, "stoichiometric coefficient {v} exceeds 1000000")
            }
            ParseErrorKind::RateCount { expected, got } => {
                write!(f, "expected {expected} rate constant(s), got {got}")
            }
        }
    }
}
