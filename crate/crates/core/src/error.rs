use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { len: usize, shape: Vec<usize> },
    #[error("axis {axis} out of range for shape {shape:?}")]
    InvalidAxis { axis: usize, shape: Vec<usize> },
    #[error("index {index} out of range for dimension of size {bound}")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("node {0} does not require a gradient")]
    NotDifferentiable(usize),
    #[error("node {0} is not on this tape")]
    UnknownNode(usize),
    #[error("parameter `{0}` is missing")]
    MissingParam(String),
    #[error("parameter sets differ in structure: {0}")]
    StructureMismatch(String),
    #[error("length mismatch: {what} has {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step called on a terminal state")]
    TerminalState,
    #[error("checkpoint parse error at line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
