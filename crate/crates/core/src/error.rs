use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("query budget of {budget} exhausted")]
    BudgetExceeded { budget: u64 },

    #[error("input of size {size} exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    /// The canonical search ran out of its node budget. `seed`/`stream`
    /// identify the Monte Carlo draw that produced the input, when known.
    #[error("canonical search exceeded {budget} nodes (seed {seed:?}, stream {stream:?})")]
    Timeout {
        budget: usize,
        seed: Option<u64>,
        stream: Option<u64>,
    },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
