use thiserror::Error;

/// Errors raised across the simulator, perception stack, and harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    /// A point prompt landed on a cell no garment covers.
    #[error("no garment at cell ({x}, {y})")]
    NoGarment { x: i32, y: i32 },

    /// The caller broke an operation contract (e.g. fine-tuning with nothing flagged).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The remote reasoner answered with something that does not match the wire schema.
    #[error("reasoner protocol error: {0}")]
    Protocol(String),

    #[error("reasoner transport error: {0}")]
    Transport(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures originating in the remote reasoner link.
    pub fn is_remote(&self) -> bool {
        matches!(self, Error::Protocol(_) | Error::Transport(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
