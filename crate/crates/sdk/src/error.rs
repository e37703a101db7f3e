use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdkError {
    /// The peer could not be reached or the exchange broke off.
    #[error("transport: {0}")]
    Transport(String),
    #[error("{status}: {message}")]
    Api { status: u16, message: String },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("invalid in state {0}")]
    WrongState(&'static str),
}

impl SdkError {
    pub fn status(&self) -> Option<u16> {
        match self {
            SdkError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }
}
