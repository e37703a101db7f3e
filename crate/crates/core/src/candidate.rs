use std::collections::HashSet;
use std::net::{IpAddr, SocketAddr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest port a candidate may advertise; the adaptor only binds ephemeral ports.
pub const MIN_CANDIDATE_PORT: u16 = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Udp,
    Tcp,
}

impl TransportKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransportKind::Udp => "udp",
            TransportKind::Tcp => "tcp",
        }
    }
}

/// An address at which an endpoint can receive media.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransportCandidate {
    pub kind: TransportKind,
    pub address: IpAddr,
    pub port: u16,
    pub priority: u32,
}

impl TransportCandidate {
    pub fn udp(addr: SocketAddr, priority: u32) -> Self {
        Self {
            kind: TransportKind::Udp,
            address: addr.ip(),
            port: addr.port(),
            priority,
        }
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.address, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CandidateError {
    #[error("candidate list is empty")]
    Empty,
    #[error("candidate port {0} is not above 1024")]
    PortTooLow(u16),
    #[error("duplicate candidate priority {0}")]
    DuplicatePriority(u32),
}

/// Checks a registration candidate list: non-empty, every port above 1024 and
/// priorities unique within the list.
pub fn validate_candidates(candidates: &[TransportCandidate]) -> Result<(), CandidateError> {
    if candidates.is_empty() {
        return Err(CandidateError::Empty);
    }
    let mut seen = HashSet::with_capacity(candidates.len());
    for c in candidates {
        if c.port < MIN_CANDIDATE_PORT {
            return Err(CandidateError::PortTooLow(c.port));
        }
        if !seen.insert(c.priority) {
            return Err(CandidateError::DuplicatePriority(c.priority));
        }
    }
    Ok(())
}
