use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("resolution mismatch: expected {expected}, got {got}")]
    ResolutionMismatch { expected: u32, got: u32 },

    #[error("radius {0} is not a dyadic rational")]
    NotDyadic(String),

    #[error("function attains infinity where a finite value is required")]
    Unbounded,

    #[error("lower semicontinuity violated at {0}")]
    NotLsc(String),

    #[error("not an element of the test lattice: {0}")]
    NotLambda(String),

    #[error("inconsistent valuation: {constraint} fails at {location}")]
    Inconsistent { constraint: String, location: String },

    #[error("Hall condition fails: {omega_size} items see only {neighbours} partners (deficient set {omega:?})")]
    HallViolation {
        omega: Vec<usize>,
        omega_size: usize,
        neighbours: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("spectrum covers the requested gap {0}")]
    FullSpectrum(String),

    #[error("lift failed at step {step}: {cause}")]
    LiftStep { step: u8, cause: Box<Error> },

    #[error("sequence does not settle at resolution {requested}; deepest settled resolution is {settled:?}")]
    NotSettled { requested: u32, settled: Option<u32> },

    #[error("{0}")]
    Invariant(String),
}

impl Error {
    /// Short machine-readable name used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::ResolutionMismatch { .. } => "resolution_mismatch",
            Error::NotDyadic(_) => "not_dyadic",
            Error::Unbounded => "unbounded",
            Error::NotLsc(_) => "lower_semicontinuity",
            Error::NotLambda(_) => "lambda_membership",
            Error::Inconsistent { .. } => "inconsistent_valuation",
            Error::HallViolation { .. } => "hall_violation",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Graph(_) => "graph",
            Error::Region(_) => "region",
            Error::FullSpectrum(_) => "full_spectrum",
            Error::LiftStep { .. } => "lift_step",
            Error::NotSettled { .. } => "not_settled",
            Error::Invariant(_) => "internal_invariant",
        }
    }

    /// True for errors that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Invariant(_) => true,
            Error::LiftStep { cause, .. } => cause.is_internal(),
            _ => false,
        }
    }

    pub fn inconsistent(constraint: impl Into<String>, location: impl Into<String>) -> Self {
        Error::Inconsistent {
            constraint: constraint.into(),
            location: location.into(),
        }
    }

    pub fn at_step(self, step: u8) -> Self {
        Error::LiftStep {
            step,
            cause: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
