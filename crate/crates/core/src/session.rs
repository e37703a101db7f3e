use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::{validate_candidates, CandidateError, TransportCandidate};

/// JSON session parameters a participant publishes when joining a conference:
/// where it receives media and which codecs it can use.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionDescriptor {
    #[serde(default)]
    pub candidates: Vec<TransportCandidate>,
    #[serde(default)]
    pub codecs_supported: Vec<String>,
    #[serde(default)]
    pub codecs_preferred: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_stream_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("invalid candidates: {0}")]
    Candidates(#[from] CandidateError),
    #[error("preferred codec {0:?} is not in the supported list")]
    PreferredNotSupported(String),
    #[error("no codecs supported")]
    NoCodecs,
}

impl SessionDescriptor {
    /// A descriptor that lists `codecs` as both supported and preferred.
    pub fn new(candidates: Vec<TransportCandidate>, codecs: &[&str]) -> Self {
        let codecs: Vec<String> = codecs.iter().map(|c| c.to_string()).collect();
        Self {
            candidates,
            codecs_preferred: codecs.clone(),
            codecs_supported: codecs,
            media_stream_url: None,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        // a centrally mixed session may carry only a stream URL
        if !(self.candidates.is_empty() && self.media_stream_url.is_some()) {
            validate_candidates(&self.candidates)?;
        }
        if self.codecs_supported.is_empty() {
            return Err(SessionError::NoCodecs);
        }
        if let Some(bad) = self
            .codecs_preferred
            .iter()
            .find(|p| !self.codecs_supported.contains(p))
        {
            return Err(SessionError::PreferredNotSupported(bad.clone()));
        }
        Ok(())
    }
}
