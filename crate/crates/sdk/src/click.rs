use std::collections::VecDeque;

use crate::error::SdkError;
use crate::phone::PhoneHandle;
use crate::state::{CallState, Outcome};

/// Targets remembered by a click-to-call widget.
pub const HISTORY_LEN: usize = 10;

/// Extracts an aor from `alice@example.net`, `sip:alice@example.net` or a
/// URL ending in `/login/alice@example.net`.
pub fn parse_target(target: &str) -> Option<String> {
    let t = target.trim();
    let aor = if let Some(idx) = t.rfind("/login/") {
        t[idx + "/login/".len()..].trim_end_matches('/')
    } else {
        t.strip_prefix("sip:").unwrap_or(t)
    };
    let (user, host) = aor.split_once('@')?;
    (!user.is_empty() && !host.is_empty() && !host.contains('/')).then(|| aor.to_string())
}

/// Progress label shown by a click-to-call element.
pub fn label(state: CallState, outcome: Option<&Outcome>) -> &'static str {
    match (state, outcome) {
        (CallState::Idle, _) | (CallState::Online, _) => "Call",
        (CallState::Registering, _) => "Connecting",
        (CallState::Inviting, _) => "Ringing",
        (CallState::Invited, _) => "Call",
        (CallState::Joining, _) => "Connecting media",
        (CallState::InCall, _) => "Hang up",
        (CallState::Ended, Some(Outcome::Rejected)) => "Declined",
        (CallState::Ended, Some(Outcome::Busy)) => "Busy",
        (CallState::Ended, _) => "Call ended",
        (CallState::Failed, Some(Outcome::Offline)) => "Unavailable",
        (CallState::Failed, Some(Outcome::InstallHint)) => "Install the adaptor",
        (CallState::Failed, _) => "Call failed",
    }
}

/// One-shot caller bound to a single target. Its phone must be configured
/// with `accepts_calls = false`.
pub struct ClickToCall {
    phone: PhoneHandle,
    target: String,
    history: VecDeque<String>,
}

impl ClickToCall {
    pub fn new(phone: PhoneHandle, target: &str) -> Result<Self, SdkError> {
        let target = parse_target(target).ok_or_else(|| SdkError::Protocol(format!("bad target {target:?}")))?;
        Ok(Self {
            phone,
            target,
            history: VecDeque::with_capacity(HISTORY_LEN),
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn set_target(&mut self, target: &str) -> Result<(), SdkError> {
        self.target = parse_target(target).ok_or_else(|| SdkError::Protocol(format!("bad target {target:?}")))?;
        Ok(())
    }

    pub fn history(&self) -> impl Iterator<Item = &str> {
        self.history.iter().map(String::as_str)
    }

    pub fn label(&self) -> &'static str {
        let snap = self.phone.snapshot();
        label(snap.state, snap.outcome.as_ref())
    }

    pub fn phone(&self) -> &PhoneHandle {
        &self.phone
    }

    /// Logs in if needed, then dials; while a call is up, hangs up instead.
    pub async fn click(&mut self) -> Result<CallState, SdkError> {
        match self.phone.state() {
            CallState::Idle => {
                self.phone.login().await?;
                self.dial().await?;
            }
            CallState::Online | CallState::Ended | CallState::Failed => self.dial().await?,
            CallState::Inviting | CallState::Joining | CallState::InCall => self.phone.hangup().await?,
            CallState::Registering | CallState::Invited => {}
        }
        Ok(self.phone.state())
    }

    async fn dial(&mut self) -> Result<(), SdkError> {
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(self.target.clone());
        self.phone.call(&self.target).await
    }
}
