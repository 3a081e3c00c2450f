use thiserror::Error;

use crate::trees::NodeIndex;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("expected {expected} labels, got {got}")]
    LabelLength { expected: usize, got: usize },
    #[error("node {0} is not a valid index for this shape")]
    InvalidIndex(NodeIndex),
    #[error("deletion set references node {0}, which is not present in the tree")]
    MissingNode(NodeIndex),
    #[error("operation requires a complete k-ary shape")]
    NotKary,
    #[error("operation requires a spider shape")]
    NotSpider,
    #[error("unsupported shape for this algorithm: {0}")]
    ShapeUnsupported(String),
    #[error("probability out of range: {name} = {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("no traces supplied")]
    NoTraces,
    #[error("every trace was censored")]
    AllCensored,
    #[error("string length {m} exceeds the exhaustive search cap {cap}")]
    StringTooLong { m: usize, cap: usize },
    #[error("labels are identical, no distinguishing index")]
    IdenticalLabels,
    #[error("difference vector is all zero, factored generating function undefined")]
    ZeroDifference,
    #[error("empty bucket for node {j}")]
    EmptyBucket { j: NodeIndex },
    #[error("no s-stable trace for node {i}")]
    NoStableTraces { i: NodeIndex },
    #[error("trace {trace} has no route to node {j}")]
    PerpEncountered { trace: usize, j: NodeIndex },
    #[error("no trace keeps the caterpillar of node {i}")]
    NoCaterpillarTrace { i: NodeIndex },
    #[error("no trace contains every spider path")]
    NoCompleteTrace,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("grid outside the range where the bounds apply: {0}")]
    Hypothesis(String),
}

impl Error {
    /// Failures declared by a reconstruction algorithm itself (as opposed to
    /// bad input). The CLI maps these to exit code 2.
    pub fn is_termination(&self) -> bool {
        matches!(
            self,
            Error::EmptyBucket { .. }
                | Error::NoStableTraces { .. }
                | Error::PerpEncountered { .. }
                | Error::NoCaterpillarTrace { .. }
                | Error::NoCompleteTrace
                | Error::AllCensored
        )
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64, allow_one: bool) -> Result<()> {
    let ok = value >= 0.0 && if allow_one { value <= 1.0 } else { value < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::Probability { name, value })
    }
}
