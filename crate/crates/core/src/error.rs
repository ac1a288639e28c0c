use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("type error at {line}:{col}: expected {expected}, found {found}")]
    Type {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },

    #[error("undeclared variable `{name}` at {line}:{col}")]
    Undeclared {
        name: String,
        line: usize,
        col: usize,
    },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("array index {index} out of bounds for length {len}")]
    OutOfBounds { index: String, len: usize },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid coupling at site {site}: {msg}")]
    Coupling { site: String, msg: String },

    #[error("pair space is not closed: {0}")]
    Unclosed(String),

    #[error("iteration budget exceeded: {0}")]
    Budget(String),

    #[error("program not provably terminating: {0}")]
    NotTerminating(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bad parameters: {0}")]
    Params(String),

    #[error("state space too large: {0}")]
    StateSpace(String),
}

impl Error {
    pub fn eval(msg: impl Into<String>) -> Error {
        Error::Eval(msg.into())
    }
}
