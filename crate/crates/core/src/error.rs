use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: self-loop on node `{label}`")]
    SelfLoop { line: usize, label: String },

    #[error("cascade nodes not present in the graph: {}", .0.join(", "))]
    UnknownNodes(Vec<String>),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch in `{slot}`: expected {expected:?}, found {found:?}")]
    Shape {
        slot: String,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
