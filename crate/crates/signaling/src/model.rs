use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use webvoice_core::{SessionDescriptor, TransportCandidate};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub aor: String,
    pub contact_id: String,
    pub candidates: Vec<TransportCandidate>,
    /// Absolute expiry, seconds since the Unix epoch.
    pub expires_at: u64,
    #[serde(default)]
    pub presence: Map<String, Value>,
}

impl ContactRecord {
    pub fn path(&self) -> String {
        format!("/login/{}/{}", self.aor, self.contact_id)
    }

    pub fn is_live(&self, now_ms: u64) -> bool {
        now_ms < self.expires_at.saturating_mul(1000)
    }
}

/// Body of `POST /login/{aor}` and `PUT /login/{aor}/{cid}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub candidates: Vec<TransportCandidate>,
    #[serde(default)]
    pub presence: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expires_seconds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registered {
    pub contact_id: String,
    pub contact_path: String,
    pub expires_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginPage {
    pub total: usize,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantEntry {
    pub participant_id: String,
    pub aor: String,
    pub session: SessionDescriptor,
    pub joined_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConferenceResource {
    pub call_id: String,
    pub participants: Vec<ParticipantEntry>,
    pub created_at: u64,
}

impl ConferenceResource {
    pub fn path(&self) -> String {
        format!("/call/{}", self.call_id)
    }
}

/// Event types carried on signaling subscriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    MembershipChange,
    Invitation,
    Cancellation,
    ContactUpdate,
    /// Free-form conference message (text chat).
    Message,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::MembershipChange => "membership-change",
            EventKind::Invitation => "invitation",
            EventKind::Cancellation => "cancellation",
            EventKind::ContactUpdate => "contact-update",
            EventKind::Message => "message",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "membership-change" => EventKind::MembershipChange,
            "invitation" => EventKind::Invitation,
            "cancellation" => EventKind::Cancellation,
            "contact-update" => EventKind::ContactUpdate,
            "message" => EventKind::Message,
            _ => return None,
        })
    }
}
