use std::fmt;

use serde::{Deserialize, Serialize};
use webvoice_core::SessionDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallState {
    Idle,
    Registering,
    Online,
    Inviting,
    Invited,
    Joining,
    InCall,
    Ended,
    Failed,
}

impl CallState {
    pub fn as_str(&self) -> &'static str {
        match self {
            CallState::Idle => "idle",
            CallState::Registering => "registering",
            CallState::Online => "online",
            CallState::Inviting => "inviting",
            CallState::Invited => "invited",
            CallState::Joining => "joining",
            CallState::InCall => "in-call",
            CallState::Ended => "ended",
            CallState::Failed => "failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, CallState::Ended | CallState::Failed)
    }

    /// Edges of the call graph. Every state may move to ended or failed.
    pub fn can_move_to(self, next: CallState) -> bool {
        use CallState::*;
        if matches!(next, Ended | Failed) {
            return !self.is_terminal();
        }
        matches!(
            (self, next),
            (Idle, Registering)
                | (Registering, Online)
                | (Online, Inviting)
                | (Online, Invited)
                | (Inviting, Joining)
                | (Invited, Joining)
                | (Joining, InCall)
        )
    }
}

impl fmt::Display for CallState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a call reached `ended` or `failed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Hangup,
    RemoteHangup,
    Rejected,
    Cancelled,
    Busy,
    Offline,
    NoPath,
    NoCommonCodec,
    AuthFailed,
    /// The adaptor could not be reached; the user should install it.
    InstallHint,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IllegalTransition {
    pub from: CallState,
    pub to: CallState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub from: CallState,
    pub to: CallState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

/// One call's lifecycle. A machine never leaves `ended` or `failed`; the
/// next call starts a fresh machine at `online`.
#[derive(Debug, Clone)]
pub struct CallStateMachine {
    state: CallState,
    pub call_path: Option<String>,
    pub peer: Option<String>,
    pub session_local: Option<SessionDescriptor>,
    pub session_remote: Option<SessionDescriptor>,
    pub outcome: Option<Outcome>,
    history: Vec<Transition>,
}

impl Default for CallStateMachine {
    fn default() -> Self {
        Self::new()
    }
}

impl CallStateMachine {
    pub fn new() -> Self {
        Self::starting_at(CallState::Idle)
    }

    /// A machine for a further call on an already registered phone.
    pub fn online() -> Self {
        Self::starting_at(CallState::Online)
    }

    fn starting_at(state: CallState) -> Self {
        Self {
            state,
            call_path: None,
            peer: None,
            session_local: None,
            session_remote: None,
            outcome: None,
            history: Vec::new(),
        }
    }

    pub fn state(&self) -> CallState {
        self.state
    }

    pub fn history(&self) -> &[Transition] {
        &self.history
    }

    pub fn move_to(&mut self, next: CallState) -> Result<(), IllegalTransition> {
        let illegal = IllegalTransition {
            from: self.state,
            to: next,
        };
        if !self.state.can_move_to(next) {
            return Err(illegal);
        }
        if next == CallState::InCall && (self.session_local.is_none() || self.session_remote.is_none()) {
            return Err(illegal);
        }
        self.history.push(Transition {
            from: self.state,
            to: next,
            outcome: None,
        });
        self.state = next;
        Ok(())
    }

    /// Moves to `ended` or `failed` with a reason. No-op once terminal.
    pub fn finish(&mut self, failed: bool, outcome: Outcome) -> bool {
        if self.state.is_terminal() {
            return false;
        }
        let to = if failed { CallState::Failed } else { CallState::Ended };
        self.history.push(Transition {
            from: self.state,
            to,
            outcome: Some(outcome.clone()),
        });
        self.state = to;
        self.outcome = Some(outcome);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use CallState::*;

    const ALL: [CallState; 9] = [Idle, Registering, Online, Inviting, Invited, Joining, InCall, Ended, Failed];

    #[test]
    fn graph_has_exactly_the_declared_edges() {
        let forward = [
            (Idle, Registering),
            (Registering, Online),
            (Online, Inviting),
            (Online, Invited),
            (Inviting, Joining),
            (Invited, Joining),
            (Joining, InCall),
        ];
        for a in ALL {
            for b in ALL {
                let expected = forward.contains(&(a, b)) || (!a.is_terminal() && b.is_terminal());
                assert_eq!(a.can_move_to(b), expected, "{a} -> {b}");
            }
        }
    }

    #[test]
    fn in_call_needs_both_descriptors() {
        let mut m = CallStateMachine::online();
        m.move_to(Inviting).unwrap();
        m.move_to(Joining).unwrap();
        assert!(m.move_to(InCall).is_err());
        m.session_local = Some(SessionDescriptor::default());
        m.session_remote = Some(SessionDescriptor::default());
        m.move_to(InCall).unwrap();
        assert!(m.finish(false, Outcome::Hangup));
        assert!(!m.finish(true, Outcome::NoPath));
        assert_eq!(m.state(), Ended);
        assert_eq!(m.history().len(), 4);
    }
}
