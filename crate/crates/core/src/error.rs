use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truth table has {actual} entries, expected 2^{n} = {expected}")]
    LengthMismatch {
        n: usize,
        expected: usize,
        actual: usize,
    },
    #[error("truth table entry {index} is {value}, expected +1 or -1")]
    NonBooleanValue { index: usize, value: f64 },
    #[error("variable count {0} outside supported range 1..={max}", max = crate::MAX_VARS)]
    TooManyVariables(usize),
    #[error("coordinate {k} outside 1..={n}")]
    CoordinateOutOfRange { k: usize, n: usize },
    #[error("bias p = {0} outside [1e-6, 1 - 1e-6]")]
    BiasOutOfRange(f64),
    #[error("operands were computed under different biases ({0} vs {1})")]
    BiasMismatch(f64, f64),
    #[error("operands have different variable counts ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("squared coefficients sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("noise/moment parameter {0} outside its allowed range")]
    EpsOutOfRange(f64),
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("spectrum has no nonzero coefficient")]
    ZeroSpectrum,
    #[error("restriction assignment {assignment:#b} sets alive coordinates {alive:#b}")]
    AssignmentOverlapsAlive { alive: u32, assignment: u32 },
    #[error("chain step {k} outside 1..={n}")]
    StepOutOfRange { k: usize, n: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("malformed truth table: {0}")]
    BadTable(String),
    #[error("function source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("{what} with n = {n} is too large (limit {limit})")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("local refinement needs a non-constant starting function")]
    ConstantStart,
    #[error("cannot merge search reports with different configurations: {0}")]
    ConfigMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
