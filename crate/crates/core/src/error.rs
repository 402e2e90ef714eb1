use thiserror::Error;

use crate::flow::VoltageState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid parse error: {0}")]
    Parse(String),

    #[error("invalid grid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("duplicate bus index {0}")]
    DuplicateBus(usize),

    #[error("multiple slack buses")]
    MultipleSlack,

    #[error("no slack bus")]
    NoSlack,

    #[error("branch {branch}: bus index {index} out of range for {n} buses")]
    BranchIndex {
        branch: usize,
        index: usize,
        n: usize,
    },

    #[error("branch {0} connects a bus to itself")]
    SelfLoop(usize),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("variable count mismatch: {0} vs {1}")]
    VariableCount(usize, usize),

    #[error("invalid spin value {value} at position {position}")]
    InvalidSpin { position: usize, value: i8 },

    #[error("base voltage at the slack bus differs from the grid's slack voltage")]
    SlackMismatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("iteration {it} out of range 0..={it_max}")]
    IterationRange { it: usize, it_max: usize },

    #[error("jacobian singular")]
    JacobianSingular { iteration: usize },

    #[error("nr diverged")]
    NrDiverged {
        last: Box<VoltageState>,
        residual: f64,
    },

    #[error("{n} variables too large for exhaustive search (limit {limit})")]
    TooLargeForExhaustive { n: usize, limit: usize },

    #[error("{n} variables too large for statevector simulation (limit {limit})")]
    TooLargeForStatevector { n: usize, limit: usize },

    #[error("iteration {it}: {source}")]
    Iteration {
        it: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trace export failed: {0}")]
    Export(String),
}
