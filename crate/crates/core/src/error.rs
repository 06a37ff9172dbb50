use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration guard exceeded: N = {n} > {max} (set PERMFIX_GUARD_N to raise it)")]
    GuardExceeded { n: usize, max: usize },

    #[error("invalid distribution `{label}`: {reason}")]
    InvalidDistribution { label: String, reason: String },

    #[error("invalid kernel `{label}`: {reason}")]
    InvalidKernel { label: String, reason: String },

    #[error("negative transition probability in `{label}` at ({from}, {to})")]
    NegativeEntry { label: String, from: i64, to: i64 },

    #[error("division by zero in recursion step at x = {x}")]
    DivisionByZero { x: usize },

    #[error("zero-mass block {block} in partitioned chain")]
    ZeroMassBlock { block: i64 },

    #[error("state {state} has zero weight under the reference measure")]
    ZeroWeightState { state: i64 },

    #[error("the two cycle-type kernel constructions disagree at ({from}, {to})")]
    ConstructionMismatch { from: String, to: String },

    #[error("singular matrix at pivot column {column}")]
    SingularMatrix { column: usize },

    #[error("precision insufficient: {0}")]
    PrecisionInsufficient(String),

    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
