use thiserror::Error;

pub type Result<T> = std::result::Result<T, BkError>;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum BkError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("block mismatch: {0}")]
    BlockMismatch(String),

    #[error("arc ({i},{j}) has even distance {distance}; saddle width is not integral")]
    NonIntegralSaddleWidth { i: i64, j: i64, distance: u64 },

    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),

    #[error("matching layers do not compose: {0}")]
    NonComposable(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}
