//! Softphone: registration, outgoing and incoming calls and the media path,
//! driven by one task that serializes API commands with signaling and
//! adaptor events.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use webvoice_core::{EventFrame, SessionDescriptor, SharedClock, SystemClock, TransportCandidate};
use webvoice_media::negotiate_codecs;

use crate::adaptor::AdaptorClient;
use crate::error::SdkError;
use crate::http::{EventStream, HttpLike};
use crate::roster::RosterModel;
use crate::signaling::{Participant, SignalingClient};
use crate::state::{CallState, CallStateMachine, Outcome, Transition};

#[derive(Debug, Clone)]
pub struct PhoneConfig {
    pub aor: String,
    pub secret: String,
    /// Origin presented to the adaptor.
    pub app_id: String,
    /// Supported codecs, most preferred first.
    pub codecs: Vec<String>,
    pub tone_hz: f64,
    /// Click-to-call phones ignore invitations.
    pub accepts_calls: bool,
    pub auto_answer: bool,
    pub expires_seconds: Option<u64>,
    /// Subscribe to the `/login` collection and maintain a roster.
    pub roster: bool,
}

impl PhoneConfig {
    pub fn new(aor: &str, secret: &str) -> Self {
        Self {
            aor: aor.to_string(),
            secret: secret.to_string(),
            app_id: "webvoice-sdk".to_string(),
            codecs: vec!["tone".into(), "pcm16".into()],
            tone_hz: 440.0,
            accepts_calls: true,
            auto_answer: false,
            expires_seconds: None,
            roster: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhoneSnapshot {
    pub aor: String,
    pub state: CallState,
    pub outcome: Option<Outcome>,
    pub call_path: Option<String>,
    pub peer: Option<String>,
    pub contact_id: Option<String>,
    pub session_local: Option<SessionDescriptor>,
    pub session_remote: Option<SessionDescriptor>,
    pub codec: Option<String>,
    pub roster_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum PhoneEvent {
    State {
        state: CallState,
        outcome: Option<Outcome>,
    },
    Invitation {
        from: String,
        conference: String,
    },
    Message {
        from: String,
        text: String,
    },
    Roster {
        version: u64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MediaStats {
    pub packets_sent: u64,
    pub packets_received: u64,
    pub frames_played: u64,
    pub gaps: u64,
}

type Reply<T> = oneshot::Sender<Result<T, SdkError>>;

enum Command {
    Login(Reply<()>),
    Call(String, Reply<()>),
    Accept(Reply<CallState>),
    Reject(Reply<()>),
    Hangup(Reply<()>),
    Message(String, Reply<u64>),
    Stats(Reply<MediaStats>),
    Objects(Reply<Vec<Value>>),
    Histories(Reply<Vec<Vec<Transition>>>),
    Roster(Reply<RosterModel>),
    Logout(Reply<()>),
}

/// Handle to a running softphone task. Cloneable; the task stops when
/// every handle is dropped.
#[derive(Clone)]
pub struct PhoneHandle {
    commands: mpsc::UnboundedSender<Command>,
    snapshot: watch::Receiver<PhoneSnapshot>,
    events: broadcast::Sender<PhoneEvent>,
}

macro_rules! request {
    ($self:ident, $variant:ident $(, $arg:expr)*) => {{
        let (tx, rx) = oneshot::channel();
        $self
            .commands
            .send(Command::$variant($($arg,)* tx))
            .map_err(|_| SdkError::Transport("phone task stopped".into()))?;
        rx.await.map_err(|_| SdkError::Transport("phone task stopped".into()))?
    }};
}

impl PhoneHandle {
    pub async fn login(&self) -> Result<(), SdkError> {
        request!(self, Login)
    }

    /// Starts a call; returns once the invitation is out (or the call failed).
    pub async fn call(&self, callee: &str) -> Result<(), SdkError> {
        request!(self, Call, callee.to_string())
    }

    pub async fn accept(&self) -> Result<CallState, SdkError> {
        request!(self, Accept)
    }

    pub async fn reject(&self) -> Result<(), SdkError> {
        request!(self, Reject)
    }

    pub async fn hangup(&self) -> Result<(), SdkError> {
        request!(self, Hangup)
    }

    pub async fn send_message(&self, text: &str) -> Result<u64, SdkError> {
        request!(self, Message, text.to_string())
    }

    pub async fn media_stats(&self) -> Result<MediaStats, SdkError> {
        request!(self, Stats)
    }

    /// Objects this phone currently holds in its adaptor scope.
    pub async fn adaptor_objects(&self) -> Result<Vec<Value>, SdkError> {
        request!(self, Objects)
    }

    /// Transition history of every call machine so far, oldest first.
    pub async fn histories(&self) -> Result<Vec<Vec<Transition>>, SdkError> {
        request!(self, Histories)
    }

    pub async fn roster(&self) -> Result<RosterModel, SdkError> {
        request!(self, Roster)
    }

    pub async fn logout(&self) -> Result<(), SdkError> {
        request!(self, Logout)
    }

    pub fn snapshot(&self) -> PhoneSnapshot {
        self.snapshot.borrow().clone()
    }

    pub fn state(&self) -> CallState {
        self.snapshot.borrow().state
    }

    pub fn subscribe(&self) -> broadcast::Receiver<PhoneEvent> {
        self.events.subscribe()
    }

    /// Resolves once `pred` holds for the current snapshot.
    pub async fn wait_until(&self, pred: impl Fn(&PhoneSnapshot) -> bool) -> PhoneSnapshot {
        let mut rx = self.snapshot.clone();
        let snap = rx.wait_for(|s| pred(s)).await.map(|s| s.clone());
        snap.unwrap_or_else(|_| self.snapshot())
    }

    pub async fn wait_for_state(&self, state: CallState) -> PhoneSnapshot {
        self.wait_until(|s| s.state == state).await
    }
}

/// Adaptor objects backing one call's media path.
#[derive(Debug, Default)]
struct MediaSet {
    ice: String,
    candidates: Vec<TransportCandidate>,
    used: bool,
    rtp: String,
    mic: Option<String>,
    speaker: Option<String>,
}

struct Invite {
    return_path: String,
}

pub struct Softphone {
    config: PhoneConfig,
    clock: SharedClock,
    signaling: SignalingClient,
    adaptor: AdaptorClient,
    machine: CallStateMachine,
    finished: Vec<Vec<Transition>>,
    contact_id: Option<String>,
    participant_id: Option<String>,
    media: Option<MediaSet>,
    invite: Option<Invite>,
    codec: Option<String>,
    roster: RosterModel,
    login_events: Option<EventStream>,
    call_events: Option<EventStream>,
    adaptor_events: Option<EventStream>,
    roster_events: Option<EventStream>,
    snapshot: watch::Sender<PhoneSnapshot>,
    events: broadcast::Sender<PhoneEvent>,
}

async fn next_event(stream: &mut Option<EventStream>) -> Option<EventFrame> {
    match stream {
        Some(s) => s.next().await,
        None => std::future::pending().await,
    }
}

impl Softphone {
    /// Spawns a phone on the current tokio runtime.
    pub fn spawn(config: PhoneConfig, signaling: Arc<dyn HttpLike>, adaptor: Arc<dyn HttpLike>) -> PhoneHandle {
        Self::spawn_with_clock(config, signaling, adaptor, Arc::new(SystemClock))
    }

    pub fn spawn_with_clock(
        config: PhoneConfig,
        signaling: Arc<dyn HttpLike>,
        adaptor: Arc<dyn HttpLike>,
        clock: SharedClock,
    ) -> PhoneHandle {
        let machine = CallStateMachine::new();
        let (snapshot, snapshot_rx) = watch::channel(PhoneSnapshot {
            aor: config.aor.clone(),
            state: machine.state(),
            outcome: None,
            call_path: None,
            peer: None,
            contact_id: None,
            session_local: None,
            session_remote: None,
            codec: None,
            roster_version: 0,
        });
        let (events, _) = broadcast::channel(256);
        let (tx, rx) = mpsc::unbounded_channel();
        let phone = Softphone {
            config,
            clock,
            signaling: SignalingClient::new(signaling),
            adaptor: AdaptorClient::new(adaptor),
            machine,
            finished: Vec::new(),
            contact_id: None,
            participant_id: None,
            media: None,
            invite: None,
            codec: None,
            roster: RosterModel::default(),
            login_events: None,
            call_events: None,
            adaptor_events: None,
            roster_events: None,
            snapshot,
            events: events.clone(),
        };
        tokio::spawn(phone.run(rx));
        PhoneHandle {
            commands: tx,
            snapshot: snapshot_rx,
            events,
        }
    }

    async fn run(mut self, mut commands: mpsc::UnboundedReceiver<Command>) {
        loop {
            tokio::select! {
                biased;
                cmd = commands.recv() => match cmd {
                    Some(cmd) => self.on_command(cmd).await,
                    None => break,
                },
                ev = next_event(&mut self.adaptor_events) => match ev {
                    Some(ev) => self.on_adaptor_event(ev).await,
                    None => self.adaptor_events = None,
                },
                ev = next_event(&mut self.call_events) => match ev {
                    Some(ev) => self.on_call_event(ev).await,
                    None => self.call_events = None,
                },
                ev = next_event(&mut self.login_events) => match ev {
                    Some(ev) => self.on_login_event(ev).await,
                    None => self.login_events = None,
                },
                ev = next_event(&mut self.roster_events) => match ev {
                    Some(ev) => {
                        if self.roster.apply(&ev) {
                            self.emit(PhoneEvent::Roster { version: self.roster.version });
                            self.publish();
                        }
                    }
                    None => self.roster_events = None,
                },
            }
        }
    }

    fn emit(&self, event: PhoneEvent) {
        let _ = self.events.send(event);
    }

    fn publish(&self) {
        let m = &self.machine;
        let snap = PhoneSnapshot {
            aor: self.config.aor.clone(),
            state: m.state(),
            outcome: m.outcome.clone(),
            call_path: m.call_path.clone(),
            peer: m.peer.clone(),
            contact_id: self.contact_id.clone(),
            session_local: m.session_local.clone(),
            session_remote: m.session_remote.clone(),
            codec: self.codec.clone(),
            roster_version: self.roster.version,
        };
        self.snapshot.send_replace(snap);
    }

    fn move_to(&mut self, next: CallState) {
        if let Err(e) = self.machine.move_to(next) {
            tracing::error!(from = %e.from, to = %e.to, "illegal call transition");
            self.machine.finish(true, Outcome::Error(format!("illegal transition {} -> {}", e.from, e.to)));
        }
        self.emit(PhoneEvent::State {
            state: self.machine.state(),
            outcome: self.machine.outcome.clone(),
        });
        self.publish();
    }

    fn finish(&mut self, failed: bool, outcome: Outcome) {
        if self.machine.finish(failed, outcome) {
            self.emit(PhoneEvent::State {
                state: self.machine.state(),
                outcome: self.machine.outcome.clone(),
            });
            self.publish();
        }
    }

    /// Starts a new call machine if the previous call is over.
    fn fresh_machine(&mut self) {
        if self.machine.state().is_terminal() && self.contact_id.is_some() {
            let done = std::mem::replace(&mut self.machine, CallStateMachine::online());
            self.finished.push(done.history().to_vec());
            self.codec = None;
            self.publish();
        }
    }

    fn login_path(&self) -> String {
        format!("/login/{}", self.config.aor)
    }

    fn local_session(&self) -> SessionDescriptor {
        let candidates = self.media.as_ref().map(|m| m.candidates.clone()).unwrap_or_default();
        let codecs: Vec<&str> = self.config.codecs.iter().map(String::as_str).collect();
        let mut s = SessionDescriptor::new(candidates, &codecs);
        s.codecs_preferred.truncate(1);
        s
    }

    async fn on_command(&mut self, cmd: Command) {
        match cmd {
            Command::Login(reply) => {
                let _ = reply.send(self.login().await);
            }
            Command::Call(callee, reply) => {
                let _ = reply.send(self.place_call(&callee).await);
            }
            Command::Accept(reply) => {
                let _ = reply.send(self.accept().await);
            }
            Command::Reject(reply) => {
                let _ = reply.send(self.reject().await);
            }
            Command::Hangup(reply) => {
                let _ = reply.send(self.hangup().await);
            }
            Command::Message(text, reply) => {
                let r = match self.machine.call_path.clone() {
                    Some(path) if matches!(self.machine.state(), CallState::Joining | CallState::InCall) => {
                        self.signaling
                            .notify(&path, json!({ "type": "message", "text": text }))
                            .await
                    }
                    _ => Err(SdkError::WrongState(self.machine.state().as_str())),
                };
                let _ = reply.send(r);
            }
            Command::Stats(reply) => {
                let _ = reply.send(self.media_stats().await);
            }
            Command::Objects(reply) => {
                let _ = reply.send(self.adaptor.objects().await);
            }
            Command::Histories(reply) => {
                let mut all = self.finished.clone();
                all.push(self.machine.history().to_vec());
                let _ = reply.send(Ok(all));
            }
            Command::Roster(reply) => {
                let _ = reply.send(Ok(self.roster.clone()));
            }
            Command::Logout(reply) => {
                let _ = reply.send(self.logout().await);
            }
        }
    }

    async fn login(&mut self) -> Result<(), SdkError> {
        if self.machine.state() != CallState::Idle {
            return Err(SdkError::WrongState(self.machine.state().as_str()));
        }
        self.move_to(CallState::Registering);
        let (aor, secret) = (self.config.aor.clone(), self.config.secret.clone());
        if let Err(e) = self.signaling.authenticate(&aor, &secret).await {
            self.finish(true, Outcome::AuthFailed);
            return Err(e);
        }
        if let Err(e) = self.adaptor.authenticate(&self.config.app_id).await {
            let outcome = match e {
                SdkError::Transport(_) => Outcome::InstallHint,
                ref other => Outcome::Error(other.to_string()),
            };
            self.finish(true, outcome);
            return Err(e);
        }
        let result = self.complete_login().await;
        if let Err(e) = &result {
            self.finish(true, Outcome::Error(e.to_string()));
        }
        result
    }

    async fn complete_login(&mut self) -> Result<(), SdkError> {
        self.adaptor_events = Some(self.adaptor.events().await?);
        let media = self.prepare_media().await?;
        let reg = self
            .signaling
            .register(&self.config.aor, &media.candidates, self.config.expires_seconds)
            .await?;
        self.media = Some(media);
        self.contact_id = Some(reg.contact_id);
        self.login_events = Some(self.signaling.subscribe(&self.login_path()).await?);
        if self.config.roster {
            self.roster_events = Some(self.signaling.subscribe("/login").await?);
            self.seed_roster().await?;
        }
        self.move_to(CallState::Online);
        Ok(())
    }

    async fn seed_roster(&mut self) -> Result<(), SdkError> {
        let mut offset = 0;
        loop {
            let page = self.signaling.logins(offset, 100).await?;
            for aor in &page.items {
                let contacts = match self.signaling.contacts(aor).await {
                    Ok(c) => c.into_iter().map(|c| c.contact_id).collect(),
                    Err(e) if e.status() == Some(404) => Vec::new(),
                    Err(e) => return Err(e),
                };
                self.roster.seed(aor, contacts);
            }
            offset += page.items.len();
            if page.items.is_empty() || offset >= page.total {
                break;
            }
        }
        self.publish();
        Ok(())
    }

    /// RTP transport under an ICE transport, with candidates gathered.
    async fn prepare_media(&self) -> Result<MediaSet, SdkError> {
        let rtp = self.adaptor.create_id("RtpTransport", json!({})).await?;
        let ice = self
            .adaptor
            .create_id("IceTransport", json!({ "components": [rtp] }))
            .await?;
        let gathered = self.adaptor.invoke(&ice, "gather", json!({})).await?;
        let candidates: Vec<TransportCandidate> = serde_json::from_value(gathered["candidates"].clone())
            .map_err(|e| SdkError::Protocol(e.to_string()))?;
        Ok(MediaSet {
            ice,
            candidates,
            used: false,
            rtp,
            mic: None,
            speaker: None,
        })
    }

    /// Closes the media objects of a finished call and registers a fresh set.
    async fn recycle_media(&mut self) {
        let used = self.media.as_ref().is_some_and(|m| m.used);
        if !used {
            return;
        }
        let old = self.media.take().expect("checked");
        for id in [old.mic, old.speaker, Some(old.ice)].into_iter().flatten() {
            if let Err(e) = self.adaptor.close(&id).await {
                tracing::debug!(object = %id, error = %e, "close failed");
            }
        }
        let Some(cid) = self.contact_id.clone() else {
            return;
        };
        match self.prepare_media().await {
            Ok(media) => {
                if let Err(e) = self
                    .signaling
                    .update_contact(&self.config.aor, &cid, &media.candidates)
                    .await
                {
                    tracing::warn!(error = %e, "contact refresh failed");
                }
                self.media = Some(media);
            }
            Err(e) => tracing::warn!(error = %e, "media refresh failed"),
        }
    }

    async fn leave_call(&mut self) {
        if let (Some(path), Some(pid)) = (self.machine.call_path.clone(), self.participant_id.take()) {
            let call_id = path.trim_start_matches("/call/");
            let _ = self.signaling.leave(call_id, &pid).await;
        }
        self.call_events = None;
    }

    async fn place_call(&mut self, callee: &str) -> Result<(), SdkError> {
        self.fresh_machine();
        if self.machine.state() != CallState::Online {
            return Err(SdkError::WrongState(self.machine.state().as_str()));
        }
        self.machine.peer = Some(callee.to_string());
        match self.signaling.contacts(callee).await {
            Ok(c) if !c.is_empty() => {}
            Ok(_) => {
                self.finish(true, Outcome::Offline);
                return Ok(());
            }
            Err(e) if e.status() == Some(404) => {
                self.finish(true, Outcome::Offline);
                return Ok(());
            }
            Err(e) => {
                self.finish(true, Outcome::Error(e.to_string()));
                return Err(e);
            }
        }
        self.move_to(CallState::Inviting);
        if let Err(e) = self.start_outgoing(callee).await {
            self.leave_call().await;
            let outcome = if e.status() == Some(404) {
                Outcome::Offline
            } else {
                Outcome::Error(e.to_string())
            };
            self.finish(true, outcome);
            self.recycle_media().await;
        }
        Ok(())
    }

    async fn start_outgoing(&mut self, callee: &str) -> Result<(), SdkError> {
        let call_id = self.signaling.create_call().await?;
        let path = format!("/call/{call_id}");
        self.machine.call_path = Some(path.clone());
        self.publish();
        self.call_events = Some(self.signaling.subscribe(&path).await?);
        let session = self.local_session();
        self.participant_id = Some(self.signaling.join(&call_id, &session).await?);
        self.machine.session_local = Some(session);
        let invitation = json!({
            "type": "invitation",
            "conference": path,
            "time": self.clock.now_ms() / 1000,
            "return": self.login_path(),
        });
        self.signaling.notify(&format!("/login/{callee}"), invitation).await?;
        self.publish();
        Ok(())
    }

    async fn on_login_event(&mut self, ev: EventFrame) {
        let p = &ev.payload;
        let conference = p["conference"].as_str().unwrap_or_default().to_string();
        let from = p["from"].as_str().unwrap_or_default().to_string();
        match ev.kind.as_str() {
            "invitation" => {
                if !self.config.accepts_calls {
                    return;
                }
                let return_path = p["return"].as_str().unwrap_or_default().to_string();
                self.fresh_machine();
                match self.machine.state() {
                    CallState::Online => {
                        self.machine.peer = Some(from.clone());
                        self.machine.call_path = Some(conference.clone());
                        self.invite = Some(Invite { return_path });
                        self.move_to(CallState::Invited);
                        self.emit(PhoneEvent::Invitation { from, conference });
                        if self.config.auto_answer {
                            let _ = self.accept().await;
                        }
                    }
                    CallState::Inviting if self.machine.peer.as_deref() == Some(from.as_str()) => {
                        self.resolve_glare(&conference, return_path).await;
                    }
                    _ => {
                        let decline = json!({ "type": "cancellation", "conference": conference, "reason": "busy" });
                        let _ = self.signaling.notify(&return_path, decline).await;
                    }
                }
            }
            "cancellation" => {
                if self.machine.call_path.as_deref() != Some(conference.as_str()) {
                    return;
                }
                let reason = p["reason"].as_str().unwrap_or("cancelled");
                match self.machine.state() {
                    CallState::Invited => {
                        self.invite = None;
                        self.finish(false, Outcome::Cancelled);
                    }
                    CallState::Inviting => {
                        let (failed, outcome) = match (reason, p["status"].as_u64()) {
                            ("rejected", _) => (false, Outcome::Rejected),
                            ("busy", _) => (false, Outcome::Busy),
                            (_, Some(status)) => (true, Outcome::Error(format!("status {status}"))),
                            _ => (false, Outcome::Cancelled),
                        };
                        self.leave_call().await;
                        self.finish(failed, outcome);
                        self.recycle_media().await;
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }

    /// Both parties invited each other. The lexicographically smaller call
    /// id survives; the side holding the larger one cancels it and joins.
    async fn resolve_glare(&mut self, theirs: &str, return_path: String) {
        let ours = self.machine.call_path.clone().unwrap_or_default();
        if ours.as_str() <= theirs {
            return;
        }
        if let Some(peer) = self.machine.peer.clone() {
            let cancel = json!({ "type": "cancellation", "conference": ours, "reason": "glare" });
            let _ = self.signaling.notify(&format!("/login/{peer}"), cancel).await;
        }
        self.leave_call().await;
        self.machine.call_path = Some(theirs.to_string());
        self.invite = Some(Invite { return_path });
        self.move_to(CallState::Joining);
        if let Err(e) = self.join_invited().await {
            self.finish(true, Outcome::Error(e.to_string()));
            self.recycle_media().await;
        }
    }

    async fn accept(&mut self) -> Result<CallState, SdkError> {
        match self.machine.state() {
            CallState::Invited => {}
            CallState::Ended if self.machine.outcome == Some(Outcome::Cancelled) => return Ok(CallState::Ended),
            other => return Err(SdkError::WrongState(other.as_str())),
        }
        self.move_to(CallState::Joining);
        match self.join_invited().await {
            Ok(()) => {}
            Err(e) if e.status() == Some(404) => {
                self.leave_call().await;
                self.finish(false, Outcome::Cancelled);
            }
            Err(e) => {
                self.leave_call().await;
                self.finish(true, Outcome::Error(e.to_string()));
                self.recycle_media().await;
            }
        }
        Ok(self.machine.state())
    }

    /// Joins the conference from the pending invitation and starts media
    /// against the inviter's published session.
    async fn join_invited(&mut self) -> Result<(), SdkError> {
        let path = self.machine.call_path.clone().unwrap_or_default();
        let call_id = path.trim_start_matches("/call/").to_string();
        let conference = self.signaling.conference(&call_id).await?;
        let peer = self.machine.peer.clone().unwrap_or_default();
        let Some(caller) = conference.participants.iter().find(|p| p.aor == peer).cloned() else {
            self.finish(false, Outcome::Cancelled);
            return Ok(());
        };
        self.call_events = Some(self.signaling.subscribe(&path).await?);
        let session = self.local_session();
        let pid = self.signaling.join(&call_id, &session).await?;
        self.participant_id = Some(pid.clone());
        self.machine.session_local = Some(session);
        self.invite = None;
        self.start_media(&pid, &caller).await
    }

    async fn reject(&mut self) -> Result<(), SdkError> {
        if self.machine.state() != CallState::Invited {
            return Err(SdkError::WrongState(self.machine.state().as_str()));
        }
        self.decline("rejected").await;
        self.finish(false, Outcome::Rejected);
        Ok(())
    }

    async fn decline(&mut self, reason: &str) {
        if let Some(invite) = self.invite.take() {
            let payload = json!({
                "type": "cancellation",
                "conference": self.machine.call_path,
                "reason": reason,
            });
            let _ = self.signaling.notify(&invite.return_path, payload).await;
        }
    }

    async fn hangup(&mut self) -> Result<(), SdkError> {
        match self.machine.state() {
            CallState::Inviting => {
                if let (Some(peer), Some(path)) = (self.machine.peer.clone(), self.machine.call_path.clone()) {
                    let cancel = json!({ "type": "cancellation", "conference": path, "reason": "cancelled" });
                    let _ = self.signaling.notify(&format!("/login/{peer}"), cancel).await;
                }
                self.leave_call().await;
                self.finish(false, Outcome::Hangup);
                self.recycle_media().await;
            }
            CallState::Invited => {
                self.decline("rejected").await;
                self.finish(false, Outcome::Hangup);
            }
            CallState::Joining | CallState::InCall => {
                self.leave_call().await;
                self.finish(false, Outcome::Hangup);
                self.recycle_media().await;
            }
            _ => {}
        }
        Ok(())
    }

    async fn logout(&mut self) -> Result<(), SdkError> {
        self.hangup().await?;
        if let Some(cid) = self.contact_id.take() {
            self.signaling.unregister(&self.config.aor, &cid).await?;
        }
        self.login_events = None;
        self.roster_events = None;
        if let Some(m) = self.media.take() {
            for id in [m.mic, m.speaker, Some(m.ice)].into_iter().flatten() {
                let _ = self.adaptor.close(&id).await;
            }
        }
        self.publish();
        Ok(())
    }

    async fn on_call_event(&mut self, ev: EventFrame) {
        let p = &ev.payload;
        match ev.kind.as_str() {
            "membership-change" => {
                let aor = p["aor"].as_str().unwrap_or_default();
                let peer = self.machine.peer.clone().unwrap_or_default();
                match (p["action"].as_str(), self.machine.state()) {
                    (Some("joined"), CallState::Inviting) if aor == peer => {
                        let participants: Vec<Participant> =
                            serde_json::from_value(p["participants"].clone()).unwrap_or_default();
                        let Some(remote) = participants.into_iter().find(|x| x.aor == peer) else {
                            return;
                        };
                        self.move_to(CallState::Joining);
                        let pid = self.participant_id.clone().unwrap_or_default();
                        if let Err(e) = self.start_media(&pid, &remote).await {
                            self.finish(true, Outcome::Error(e.to_string()));
                            self.recycle_media().await;
                        }
                    }
                    (Some("left"), CallState::Joining | CallState::InCall) if aor == peer => {
                        self.leave_call().await;
                        self.finish(false, Outcome::RemoteHangup);
                        self.recycle_media().await;
                    }
                    _ => {}
                }
            }
            "message" => {
                let from = p["from"].as_str().unwrap_or_default().to_string();
                let text = p["text"].as_str().unwrap_or_default().to_string();
                self.emit(PhoneEvent::Message { from, text });
            }
            _ => {}
        }
    }

    /// Negotiates codecs and runs connectivity checks toward `remote`. The
    /// participant with the smaller id is the offerer.
    async fn start_media(&mut self, local_pid: &str, remote: &Participant) -> Result<(), SdkError> {
        let local = self.machine.session_local.clone().unwrap_or_else(|| self.local_session());
        self.machine.session_remote = Some(remote.session.clone());
        let codecs = if local_pid <= remote.participant_id.as_str() {
            negotiate_codecs(&local, &remote.session)
        } else {
            negotiate_codecs(&remote.session, &local)
        };
        self.publish();
        let Some(codec) = codecs.first().cloned() else {
            self.finish(true, Outcome::NoCommonCodec);
            self.recycle_media().await;
            return Ok(());
        };
        self.codec = Some(codec);
        let Some(media) = self.media.as_mut() else {
            return Err(SdkError::Protocol("no media transports".into()));
        };
        media.used = true;
        if let Some(remote_addr) = plain_rtp_target(&remote.session) {
            let rtp = media.rtp.clone();
            self.adaptor
                .invoke(&rtp, "set_remote", json!({ "remote": remote_addr.to_string() }))
                .await?;
            return self.media_connected().await;
        }
        let ice = media.ice.clone();
        let state = self
            .adaptor
            .invoke(&ice, "run", json!({ "candidates": remote.session.candidates }))
            .await?;
        match state["state"]["phase"].as_str() {
            Some("failed") => self.media_failed().await,
            Some("connected") => self.media_connected().await?,
            _ => {}
        }
        Ok(())
    }

    async fn on_adaptor_event(&mut self, ev: EventFrame) {
        if ev.kind != "ice-phase" || self.machine.state() != CallState::Joining {
            return;
        }
        let ice = self.media.as_ref().map(|m| format!("/objects/{}", m.ice));
        if ice.as_deref() != Some(ev.resource.as_str()) {
            return;
        }
        match ev.payload["phase"].as_str() {
            Some("connected") => {
                if let Err(e) = self.media_connected().await {
                    self.finish(true, Outcome::Error(e.to_string()));
                    self.recycle_media().await;
                }
            }
            Some("failed") => self.media_failed().await,
            _ => {}
        }
    }

    /// Connectivity failed: the call fails but conference membership stays.
    async fn media_failed(&mut self) {
        self.finish(true, Outcome::NoPath);
        self.participant_id = None;
        self.call_events = None;
        self.recycle_media().await;
    }

    async fn media_connected(&mut self) -> Result<(), SdkError> {
        if self.machine.state() != CallState::Joining {
            return Ok(());
        }
        let codec = self.codec.clone().unwrap_or_else(|| "tone".into());
        let rtp = self.media.as_ref().map(|m| m.rtp.clone()).unwrap_or_default();
        let mic = self
            .adaptor
            .create_id("Microphone", json!({ "frequency": self.config.tone_hz }))
            .await?;
        if let Some(m) = self.media.as_mut() {
            m.mic = Some(mic.clone());
        }
        if codec != "tone" {
            self.adaptor
                .invoke(&mic, "set-attribute", json!({ "name": "codec", "value": codec }))
                .await?;
        }
        let speaker = self.adaptor.create_id("Speaker", json!({})).await?;
        if let Some(m) = self.media.as_mut() {
            m.speaker = Some(speaker.clone());
        }
        self.adaptor.invoke(&mic, "connect", json!({ "sink": rtp })).await?;
        self.adaptor.invoke(&rtp, "connect", json!({ "sink": speaker })).await?;
        self.move_to(CallState::InCall);
        Ok(())
    }

    async fn media_stats(&self) -> Result<MediaStats, SdkError> {
        let Some(m) = &self.media else {
            return Ok(MediaStats::default());
        };
        let rtp = self.adaptor.invoke(&m.rtp, "stats", json!({})).await?;
        let mut stats = MediaStats {
            packets_sent: rtp["state"]["packets_sent"].as_u64().unwrap_or(0),
            packets_received: rtp["state"]["packets_received"].as_u64().unwrap_or(0),
            ..Default::default()
        };
        if let Some(speaker) = &m.speaker {
            let s = self.adaptor.invoke(speaker, "stats", json!({})).await?;
            stats.frames_played = s["state"]["stats"]["frames"].as_u64().unwrap_or(0);
            stats.gaps = s["state"]["stats"]["gaps"].as_u64().unwrap_or(0);
        }
        Ok(stats)
    }
}

/// Peers without connectivity checks (SIP endpoints behind the gateway)
/// advertise `rtp://ip:port` as their media URL.
fn plain_rtp_target(session: &SessionDescriptor) -> Option<std::net::SocketAddr> {
    session.media_stream_url.as_deref()?.strip_prefix("rtp://")?.parse().ok()
}
