use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("not C'(1/6): maximal piece length {piece} is not below {length}/6")]
    NotSmallCancellation { piece: usize, length: usize },
    #[error("word is not trivial in the group")]
    NontrivialWord,
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("reliability precondition violated: {0}")]
    Unreliable(String),
    #[error("inconsistent lengths: {0}")]
    Lengths(String),
    #[error("a = a⁻¹ forced at unit position {position}; system has no solution")]
    OrientationConflict { position: usize },
    #[error("invalid diagram: {0}")]
    Diagram(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}
