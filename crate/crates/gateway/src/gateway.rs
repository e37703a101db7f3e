//! The gateway process: a SIP user agent on one side, a REST signaling
//! client on the other.
//!
//! * `register` turns a REST login into a REGISTER toward the registrar.
//! * Every configured SIP user gets a REST login whose invitations become
//!   outgoing INVITEs.
//! * An incoming INVITE for a user registered through the gateway becomes a
//!   REST conference plus an invitation to that user.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::net::{IpAddr, SocketAddr};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::{sleep_until, Instant};
use tracing::{debug, warn};
use webvoice_core::{Clock, EventFrame, SessionDescriptor, SystemClock, TransportCandidate};
use webvoice_media::CodecRegistry;
use webvoice_sdk::{HttpLike, Participant, SdkError, SignalingClient};

use crate::dialog::DialogState;
use crate::message::{header_uri, uri_aor, Method, SipMessage};
use crate::sdp::{SdpBlob, SdpError};
use crate::socket::SipSocket;
use crate::transaction::{run_client, TransactionError, RETRANSMIT_MS, TIMEOUT_MS};

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Address written into Via, Contact and SDP.
    pub public_ip: IpAddr,
    pub registrar: SocketAddr,
    /// Where outgoing INVITEs go; the registrar when unset.
    pub next_hop: Option<SocketAddr>,
    /// Secret the gateway uses to log in to the REST server on behalf of SIP users.
    pub rest_secret: String,
    /// SIP users reachable through the next hop, given a REST login each.
    pub sip_users: Vec<String>,
    pub ring_timeout_ms: u64,
    pub rest_expires_seconds: u64,
}

impl GatewayConfig {
    pub fn new(public_ip: IpAddr, registrar: SocketAddr, rest_secret: &str) -> Self {
        Self {
            public_ip,
            registrar,
            next_hop: None,
            rest_secret: rest_secret.to_string(),
            sip_users: Vec::new(),
            ring_timeout_ms: 60_000,
            rest_expires_seconds: 3600,
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("SIP peer answered {status} {reason}")]
    Rejected { status: u16, reason: String },
    #[error("no SIP response before the transaction timed out")]
    Timeout,
    #[error("no binding for {0}")]
    NotFound(String),
    #[error(transparent)]
    Rest(#[from] SdkError),
    #[error("transport error: {0}")]
    Transport(String),
}

impl GatewayError {
    /// Status for the REST facade.
    pub fn http_status(&self) -> u16 {
        match self {
            GatewayError::Unauthorized(_) => 401,
            GatewayError::Rejected { .. } => 502,
            GatewayError::Timeout => 504,
            GatewayError::NotFound(_) => 404,
            GatewayError::Rest(e) => e.status().unwrap_or(502),
            GatewayError::Transport(_) => 502,
        }
    }
}

impl From<TransactionError> for GatewayError {
    fn from(e: TransactionError) -> Self {
        match e {
            TransactionError::Timeout => GatewayError::Timeout,
            other => GatewayError::Transport(other.to_string()),
        }
    }
}

/// A REST user registered with the SIP registrar through the gateway.
#[derive(Debug, Clone, Serialize)]
pub struct Binding {
    pub aor: String,
    pub contact: String,
    pub expires: u64,
    #[serde(skip)]
    call_id: String,
    #[serde(skip)]
    from_tag: String,
    #[serde(skip)]
    cseq: u32,
}

/// One SIP datagram the gateway sent or received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SipLogEntry {
    pub outbound: bool,
    pub peer: SocketAddr,
    /// `INVITE`, `200 INVITE`, and so on; `malformed` for unparseable input.
    pub summary: String,
    pub call_id: String,
}

fn summarize(msg: &SipMessage) -> String {
    let method = msg.cseq().map(|(_, m)| m.to_string()).unwrap_or_default();
    match msg.status() {
        Some(s) => format!("{s} {method}"),
        None => method,
    }
}

struct LoggingSocket {
    inner: Arc<dyn SipSocket>,
    log: Arc<Mutex<Vec<SipLogEntry>>>,
}

impl LoggingSocket {
    fn record(&self, outbound: bool, peer: SocketAddr, data: &[u8]) {
        let (summary, call_id) = match SipMessage::parse(data) {
            Ok(m) => (summarize(&m), m.call_id().to_string()),
            Err(_) => ("malformed".to_string(), String::new()),
        };
        self.log.lock().unwrap().push(SipLogEntry { outbound, peer, summary, call_id });
    }
}

#[async_trait]
impl SipSocket for LoggingSocket {
    async fn send_to(&self, data: &[u8], to: SocketAddr) -> io::Result<()> {
        self.record(true, to, data);
        self.inner.send_to(data, to).await
    }

    async fn recv_from(&self) -> io::Result<(Vec<u8>, SocketAddr)> {
        let (data, from) = self.inner.recv_from().await?;
        self.record(false, from, &data);
        Ok((data, from))
    }

    fn local_addr(&self) -> SocketAddr {
        self.inner.local_addr()
    }
}

enum Control {
    Cancel,
}

type Route = mpsc::UnboundedSender<SipMessage>;

struct Shared {
    config: GatewayConfig,
    socket: LoggingSocket,
    rest: Arc<dyn HttpLike>,
    registry: CodecRegistry,
    instance: u32,
    counter: AtomicU64,
    /// Pending client transactions by `branch method`.
    transactions: Mutex<HashMap<String, Route>>,
    /// Call tasks by SIP Call-ID.
    dialogs: Mutex<HashMap<String, Route>>,
    /// Outgoing call tasks by conference path.
    calls: Mutex<HashMap<String, mpsc::UnboundedSender<Control>>>,
    bindings: Mutex<BTreeMap<String, Binding>>,
    log: Arc<Mutex<Vec<SipLogEntry>>>,
    ready: watch::Sender<usize>,
}

pub struct Gateway {
    shared: Arc<Shared>,
    tasks: Mutex<Vec<JoinHandle<()>>>,
}

impl Gateway {
    /// Starts the SIP receive loop and one REST agent per configured SIP user.
    pub fn start(config: GatewayConfig, socket: Arc<dyn SipSocket>, rest: Arc<dyn HttpLike>) -> Arc<Gateway> {
        let log = Arc::new(Mutex::new(Vec::new()));
        let users = config.sip_users.clone();
        let shared = Arc::new(Shared {
            config,
            socket: LoggingSocket { inner: socket, log: log.clone() },
            rest,
            registry: CodecRegistry::default(),
            instance: rand::random(),
            counter: AtomicU64::new(1),
            transactions: Mutex::new(HashMap::new()),
            dialogs: Mutex::new(HashMap::new()),
            calls: Mutex::new(HashMap::new()),
            bindings: Mutex::new(BTreeMap::new()),
            log,
            ready: watch::channel(0).0,
        });
        let mut tasks = vec![tokio::spawn(receive_loop(shared.clone()))];
        for aor in users {
            tasks.push(tokio::spawn(route_agent(shared.clone(), aor)));
        }
        Arc::new(Gateway { shared, tasks: Mutex::new(tasks) })
    }

    /// Waits until every configured SIP user has a REST login.
    pub async fn ready(&self) {
        let want = self.shared.config.sip_users.len();
        let mut rx = self.shared.ready.subscribe();
        let _ = rx.wait_for(|n| *n >= want).await;
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.shared.socket.local_addr()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.shared.config
    }

    /// Registers `aor` with the SIP registrar after checking its REST
    /// credentials. Completes when the registrar answers or the transaction
    /// times out.
    pub async fn register(&self, aor: &str, secret: &str, expires: u64) -> Result<Binding, GatewayError> {
        let mut rest = SignalingClient::new(self.shared.rest.clone());
        if let Err(e) = rest.authenticate(aor, secret).await {
            return Err(match e.status() {
                Some(401 | 403) => GatewayError::Unauthorized(format!("REST login for {aor} refused")),
                _ => GatewayError::Rest(e),
            });
        }
        self.shared.register(aor, expires).await
    }

    /// Removes the registration (REGISTER with Expires 0).
    pub async fn unregister(&self, aor: &str, secret: &str) -> Result<(), GatewayError> {
        if !self.shared.bindings.lock().unwrap().contains_key(aor) {
            return Err(GatewayError::NotFound(aor.to_string()));
        }
        self.register(aor, secret, 0).await.map(drop)
    }

    pub fn bindings(&self) -> Vec<Binding> {
        self.shared.bindings.lock().unwrap().values().cloned().collect()
    }

    pub fn log(&self) -> Vec<SipLogEntry> {
        self.shared.log.lock().unwrap().clone()
    }

    /// Number of datagrams sent whose summary is `summary`, e.g. `BYE`.
    pub fn sent(&self, summary: &str) -> usize {
        self.shared
            .log
            .lock()
            .unwrap()
            .iter()
            .filter(|e| e.outbound && e.summary == summary)
            .count()
    }

    pub fn shutdown(&self) {
        for t in self.tasks.lock().unwrap().drain(..) {
            t.abort();
        }
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Shared {
    fn port(&self) -> u16 {
        self.socket.local_addr().port()
    }

    fn next(&self) -> u64 {
        self.counter.fetch_add(1, Ordering::Relaxed)
    }

    fn branch(&self) -> String {
        format!("z9hG4bK{:08x}{:x}", self.instance, self.next())
    }

    fn tag(&self) -> String {
        format!("{:08x}{:x}", self.instance.rotate_left(16), self.next())
    }

    fn new_call_id(&self) -> String {
        format!("{:08x}{:x}@{}", self.instance, self.next(), self.config.public_ip)
    }

    fn via(&self, branch: &str) -> String {
        format!("SIP/2.0/UDP {}:{};branch={branch}", self.config.public_ip, self.port())
    }

    fn contact(&self, aor: &str) -> String {
        let user = aor.split('@').next().unwrap_or(aor);
        format!("sip:{user}@{}:{}", self.config.public_ip, self.port())
    }

    fn next_hop(&self) -> SocketAddr {
        self.config.next_hop.unwrap_or(self.config.registrar)
    }

    async fn send(&self, msg: &SipMessage, to: SocketAddr) {
        if let Err(e) = self.socket.send_to(&msg.serialize(), to).await {
            warn!("sip send to {to} failed: {e}");
        }
    }

    async fn transact(&self, req: &SipMessage, to: SocketAddr) -> Result<SipMessage, TransactionError> {
        let method = req.method().map(Method::to_string).unwrap_or_default();
        let key = format!("{} {method}", req.branch().unwrap_or_default());
        let (tx, mut rx) = mpsc::unbounded_channel();
        self.transactions.lock().unwrap().insert(key.clone(), tx);
        let ring = Duration::from_millis(self.config.ring_timeout_ms);
        let result = run_client(&self.socket, to, req, &mut rx, ring).await;
        self.transactions.lock().unwrap().remove(&key);
        result
    }

    async fn register(&self, aor: &str, expires: u64) -> Result<Binding, GatewayError> {
        let host = aor.split('@').nth(1).unwrap_or(aor);
        let previous = self.bindings.lock().unwrap().get(aor).cloned();
        let (call_id, from_tag, cseq) = match &previous {
            Some(b) => (b.call_id.clone(), b.from_tag.clone(), b.cseq + 1),
            None => (self.new_call_id(), self.tag(), 1),
        };
        let contact = self.contact(aor);
        let req = SipMessage::request(Method::Register, format!("sip:{host}"))
            .with_header("Via", self.via(&self.branch()))
            .with_header("Max-Forwards", "70")
            .with_header("From", format!("<sip:{aor}>;tag={from_tag}"))
            .with_header("To", format!("<sip:{aor}>"))
            .with_header("Call-ID", call_id.clone())
            .with_header("CSeq", format!("{cseq} REGISTER"))
            .with_header("Contact", format!("<{contact}>"))
            .with_header("Expires", expires.to_string());
        let resp = self.transact(&req, self.config.registrar).await?;
        match resp.status().unwrap_or(500) {
            200..=299 => {
                let binding = Binding {
                    aor: aor.to_string(),
                    contact,
                    expires: resp.expires().unwrap_or(expires),
                    call_id,
                    from_tag,
                    cseq,
                };
                let mut bindings = self.bindings.lock().unwrap();
                if expires == 0 {
                    bindings.remove(aor);
                } else {
                    bindings.insert(aor.to_string(), binding.clone());
                }
                Ok(binding)
            }
            401 | 407 => Err(GatewayError::Unauthorized(format!("registrar challenged {aor}"))),
            status => Err(GatewayError::Rejected { status, reason: reason_of(&resp) }),
        }
    }

    async fn respond(&self, req: &SipMessage, to: SocketAddr, status: u16, reason: &str) {
        self.send(&SipMessage::response_to(req, status, reason), to).await;
    }

    async fn dispatch(self: &Arc<Self>, msg: SipMessage, from: SocketAddr) {
        if msg.status().is_some() {
            let method = msg.cseq().map(|(_, m)| m.to_string()).unwrap_or_default();
            let key = format!("{} {method}", msg.branch().unwrap_or_default());
            let txn = self.transactions.lock().unwrap().get(&key).cloned();
            if let Some(tx) = txn {
                let _ = tx.send(msg);
            } else if let Some(tx) = self.dialogs.lock().unwrap().get(msg.call_id()) {
                // Retransmitted final response after its transaction ended.
                let _ = tx.send(msg);
            }
            return;
        }
        let method = msg.method().cloned().expect("requests have a method");
        let route = self.dialogs.lock().unwrap().get(msg.call_id()).cloned();
        match (method, route) {
            (_, Some(tx)) => {
                let _ = tx.send(msg);
            }
            (Method::Invite, None) => {
                let (tx, rx) = mpsc::unbounded_channel();
                self.dialogs.lock().unwrap().insert(msg.call_id().to_string(), tx);
                tokio::spawn(inbound_call(self.clone(), msg, from, rx));
            }
            (Method::Ack, None) => {}
            (Method::Bye | Method::Cancel, None) => {
                self.respond(&msg, from, 481, "Call/Transaction Does Not Exist").await;
            }
            (Method::Options, None) => {
                let resp = SipMessage::response_to(&msg, 200, "OK").with_header("Allow", ALLOW);
                self.send(&resp, from).await;
            }
            (_, None) => {
                let resp = SipMessage::response_to(&msg, 405, "Method Not Allowed").with_header("Allow", ALLOW);
                self.send(&resp, from).await;
            }
        }
    }
}

const ALLOW: &str = "INVITE, ACK, BYE, CANCEL, OPTIONS";

fn reason_of(resp: &SipMessage) -> String {
    match &resp.start {
        crate::message::StartLine::Response { reason, .. } => reason.clone(),
        _ => String::new(),
    }
}

async fn receive_loop(shared: Arc<Shared>) {
    loop {
        let (data, from) = match shared.socket.recv_from().await {
            Ok(d) => d,
            Err(e) => {
                warn!("sip socket closed: {e}");
                return;
            }
        };
        match SipMessage::parse(&data) {
            Ok(msg) => shared.dispatch(msg, from).await,
            Err(e) => debug!("dropping malformed datagram from {from}: {e}"),
        }
    }
}

async fn login(shared: &Shared, aor: &str) -> Result<SignalingClient, SdkError> {
    let mut rest = SignalingClient::new(shared.rest.clone());
    rest.authenticate(aor, &shared.config.rest_secret).await?;
    Ok(rest)
}

/// REST presence for one SIP user. Invitations sent to it become INVITEs.
async fn route_agent(shared: Arc<Shared>, aor: String) {
    let setup = async {
        let rest = login(&shared, &aor).await?;
        let candidate = TransportCandidate::udp(SocketAddr::new(shared.config.public_ip, shared.port()), 1);
        let reg = rest
            .register(&aor, &[candidate.clone()], Some(shared.config.rest_expires_seconds))
            .await?;
        let events = rest.subscribe(&format!("/login/{aor}")).await?;
        Ok::<_, SdkError>((rest, reg, events, candidate))
    };
    let (rest, reg, mut events, candidate) = match setup.await {
        Ok(v) => v,
        Err(e) => {
            warn!("cannot create a REST login for {aor}: {e}");
            return;
        }
    };
    shared.ready.send_modify(|n| *n += 1);
    let refresh = Duration::from_secs((shared.config.rest_expires_seconds / 2).max(1));
    let mut next_refresh = Instant::now() + refresh;
    loop {
        tokio::select! {
            ev = events.next() => {
                let Some(ev) = ev else { return };
                let conference = ev.payload["conference"].as_str().unwrap_or_default().to_string();
                match ev.kind.as_str() {
                    "invitation" => {
                        let caller = ev.payload["from"].as_str().unwrap_or_default().to_string();
                        let return_path = ev.payload["return"].as_str().unwrap_or_default().to_string();
                        let (tx, rx) = mpsc::unbounded_channel();
                        shared.calls.lock().unwrap().insert(conference.clone(), tx);
                        tokio::spawn(outbound_call(
                            shared.clone(),
                            rest.clone(),
                            aor.clone(),
                            caller,
                            conference,
                            return_path,
                            rx,
                        ));
                    }
                    "cancellation" => {
                        if let Some(tx) = shared.calls.lock().unwrap().get(&conference) {
                            let _ = tx.send(Control::Cancel);
                        }
                    }
                    _ => {}
                }
            }
            _ = sleep_until(next_refresh) => {
                next_refresh = Instant::now() + refresh;
                if let Err(e) = rest.update_contact(&aor, &reg.contact_id, &[candidate.clone()]).await {
                    warn!("refreshing the REST login of {aor} failed: {e}");
                }
            }
        }
    }
}

fn membership(ev: &EventFrame) -> Option<(&str, &str)> {
    (ev.kind == "membership-change").then(|| {
        (
            ev.payload["action"].as_str().unwrap_or_default(),
            ev.payload["aor"].as_str().unwrap_or_default(),
        )
    })
}

fn call_id_of(conference: &str) -> &str {
    conference.rsplit('/').next().unwrap_or(conference)
}

async fn decline(rest: &SignalingClient, return_path: &str, conference: &str, reason: &str, status: u16) {
    let payload = json!({ "type": "cancellation", "conference": conference, "reason": reason, "status": status });
    if let Err(e) = rest.notify(return_path, payload).await {
        warn!("cannot tell {return_path} about the failed call: {e}");
    }
}

/// REST caller, SIP callee.
async fn outbound_call(
    shared: Arc<Shared>,
    rest: SignalingClient,
    callee: String,
    caller: String,
    conference: String,
    return_path: String,
    mut ctl: mpsc::UnboundedReceiver<Control>,
) {
    let sip_call_id = shared.new_call_id();
    let (tx, rx) = mpsc::unbounded_channel();
    shared.dialogs.lock().unwrap().insert(sip_call_id.clone(), tx);
    OutboundCall {
        shared: shared.clone(),
        rest,
        callee,
        caller,
        conference: conference.clone(),
        return_path,
        sip_call_id: sip_call_id.clone(),
    }
    .run(&mut ctl, rx)
    .await;
    shared.dialogs.lock().unwrap().remove(&sip_call_id);
    shared.calls.lock().unwrap().remove(&conference);
}

struct OutboundCall {
    shared: Arc<Shared>,
    rest: SignalingClient,
    callee: String,
    caller: String,
    conference: String,
    return_path: String,
    sip_call_id: String,
}

impl OutboundCall {
    async fn fail(&self, reason: &str, status: u16) {
        decline(&self.rest, &self.return_path, &self.conference, reason, status).await;
    }

    async fn run(self, ctl: &mut mpsc::UnboundedReceiver<Control>, mut dialog_rx: mpsc::UnboundedReceiver<SipMessage>) {
        let shared = &self.shared;
        let call_id = call_id_of(&self.conference).to_string();
        let offer = match self.rest.conference(&call_id).await {
            Ok(conf) => conf.participants.into_iter().find(|p| p.aor == self.caller),
            Err(_) => None,
        };
        let Some(offer) = offer else {
            return self.fail("failed", 404).await;
        };
        let sdp = match SdpBlob::from_descriptor(&offer.session, &shared.registry, shared.next(), 1) {
            Ok(s) => s,
            Err(_) => return self.fail("failed", 488).await,
        };
        let Ok(mut call_events) = self.rest.subscribe(&self.conference).await else {
            return self.fail("failed", 500).await;
        };

        let mut dialog = DialogState::new(
            &self.sip_call_id,
            &format!("sip:{}", self.caller),
            &format!("sip:{}", self.callee),
            &shared.tag(),
            &format!("sip:{}", self.callee),
        );
        let cseq = dialog.next_cseq().expect("fresh dialog");
        let branch = shared.branch();
        let invite = SipMessage::request(Method::Invite, format!("sip:{}", self.callee))
            .with_header("Via", shared.via(&branch))
            .with_header("Max-Forwards", "70")
            .with_header("From", dialog.local_header())
            .with_header("To", dialog.remote_header())
            .with_header("Call-ID", self.sip_call_id.clone())
            .with_header("CSeq", format!("{cseq} INVITE"))
            .with_header("Contact", format!("<{}>", shared.contact(&self.caller)))
            .with_body("application/sdp", sdp.to_text().into_bytes());
        let hop = shared.next_hop();

        let mut txn = tokio::spawn({
            let shared = shared.clone();
            let invite = invite.clone();
            async move { shared.transact(&invite, hop).await }
        });
        let mut cancelled = false;
        let result = loop {
            tokio::select! {
                r = &mut txn => break r.unwrap_or(Err(TransactionError::Aborted)),
                c = ctl.recv(), if !cancelled => {
                    if c.is_some() {
                        cancelled = true;
                        self.send_cancel(&invite, hop).await;
                    }
                }
                ev = call_events.next(), if !cancelled => {
                    let gone = match &ev {
                        None => true,
                        Some(ev) => membership(ev) == Some(("left", self.caller.as_str())),
                    };
                    if gone {
                        cancelled = true;
                        self.send_cancel(&invite, hop).await;
                    }
                }
            }
        };

        let resp = match result {
            Ok(resp) => resp,
            Err(TransactionError::Timeout) => return self.fail("failed", 408).await,
            Err(_) => return self.fail("failed", 500).await,
        };
        let status = resp.status().unwrap_or(500);
        if status >= 300 {
            // Non-2xx finals are acknowledged inside the INVITE transaction.
            let ack = ack_for(&invite, &resp, &branch, &format!("sip:{}", self.callee));
            shared.send(&ack, hop).await;
            if cancelled {
                return;
            }
            let reason = match status {
                486 | 600 => "busy",
                603 => "rejected",
                _ => "failed",
            };
            return self.fail(reason, status).await;
        }

        dialog.confirm(resp.to_tag());
        if let Some(contact) = resp.headers.get("Contact") {
            dialog.remote_target = header_uri(contact).to_string();
        }
        let ack_branch = shared.branch();
        let ack = ack_for(&invite, &resp, &ack_branch, &dialog.remote_target);
        shared.send(&ack, hop).await;
        dialog.acks_sent += 1;

        let answer = SdpBlob::parse(&resp.body).and_then(|s| s.to_descriptor(&shared.registry));
        let answer = match (cancelled, answer) {
            (true, _) => {
                self.bye(&mut dialog, hop).await;
                return;
            }
            (false, Err(e)) => {
                self.bye(&mut dialog, hop).await;
                let status = if e == SdpError::NoCommonCodec { 488 } else { 400 };
                return self.fail("failed", status).await;
            }
            (false, Ok(d)) => d,
        };
        let pid = match self.rest.join(&call_id, &answer).await {
            Ok(pid) => pid,
            Err(e) => {
                warn!("cannot join {} for {}: {e}", self.conference, self.callee);
                self.bye(&mut dialog, hop).await;
                return;
            }
        };

        loop {
            tokio::select! {
                msg = dialog_rx.recv() => {
                    let Some(msg) = msg else { return };
                    match msg.method() {
                        None if msg.status().is_some_and(|s| (200..300).contains(&s)) => {
                            // The 200 was retransmitted: our ACK was lost.
                            shared.send(&ack, hop).await;
                        }
                        Some(Method::Bye) => {
                            let cseq = msg.cseq().map(|(n, _)| n).unwrap_or(0);
                            if dialog.accept_remote(cseq).is_err() {
                                shared.respond(&msg, hop, 500, "Server Internal Error").await;
                                continue;
                            }
                            shared.respond(&msg, hop, 200, "OK").await;
                            dialog.terminate();
                            let _ = self.rest.leave(&call_id, &pid).await;
                            return;
                        }
                        Some(Method::Ack) | None => {}
                        Some(_) => shared.respond(&msg, hop, 501, "Not Implemented").await,
                    }
                }
                ev = call_events.next() => {
                    let gone = match &ev {
                        None => true,
                        Some(ev) => membership(ev) == Some(("left", self.caller.as_str())),
                    };
                    if gone {
                        self.bye(&mut dialog, hop).await;
                        let _ = self.rest.leave(&call_id, &pid).await;
                        return;
                    }
                }
                c = ctl.recv() => {
                    if c.is_some() {
                        self.bye(&mut dialog, hop).await;
                        let _ = self.rest.leave(&call_id, &pid).await;
                        return;
                    }
                }
            }
        }
    }

    async fn send_cancel(&self, invite: &SipMessage, hop: SocketAddr) {
        let Some(cancel) = cancel_for(invite) else { return };
        let shared = self.shared.clone();
        tokio::spawn(async move {
            let _ = shared.transact(&cancel, hop).await;
        });
    }

    async fn bye(&self, dialog: &mut DialogState, to: SocketAddr) {
        send_bye(&self.shared, dialog, to).await;
    }
}

fn ack_for(invite: &SipMessage, resp: &SipMessage, branch: &str, uri: &str) -> SipMessage {
    let (cseq, _) = invite.cseq().unwrap_or((1, Method::Invite));
    let shared_via = invite.headers.get("Via").unwrap_or_default();
    let via = match shared_via.rfind(";branch=") {
        Some(i) => format!("{};branch={branch}", &shared_via[..i]),
        None => shared_via.to_string(),
    };
    SipMessage::request(Method::Ack, uri)
        .with_header("Via", via)
        .with_header("Max-Forwards", "70")
        .with_header("From", invite.headers.get("From").unwrap_or_default())
        .with_header("To", resp.headers.get("To").unwrap_or_default())
        .with_header("Call-ID", invite.call_id())
        .with_header("CSeq", format!("{cseq} ACK"))
}

fn cancel_for(invite: &SipMessage) -> Option<SipMessage> {
    let (cseq, _) = invite.cseq().ok()?;
    Some(
        SipMessage::request(Method::Cancel, invite.uri()?)
            .with_header("Via", invite.headers.get("Via")?)
            .with_header("Max-Forwards", "70")
            .with_header("From", invite.headers.get("From")?)
            .with_header("To", invite.headers.get("To")?)
            .with_header("Call-ID", invite.call_id())
            .with_header("CSeq", format!("{cseq} CANCEL")),
    )
}

/// Ends a confirmed dialog. Sends nothing once the dialog is terminated.
async fn send_bye(shared: &Arc<Shared>, dialog: &mut DialogState, to: SocketAddr) {
    let Ok(cseq) = dialog.next_cseq() else { return };
    let bye = SipMessage::request(Method::Bye, dialog.remote_target.clone())
        .with_header("Via", shared.via(&shared.branch()))
        .with_header("Max-Forwards", "70")
        .with_header("From", dialog.local_header())
        .with_header("To", dialog.remote_header())
        .with_header("Call-ID", dialog.call_id.clone())
        .with_header("CSeq", format!("{cseq} BYE"));
    dialog.byes_sent += 1;
    dialog.terminate();
    let shared = shared.clone();
    tokio::spawn(async move {
        let _ = shared.transact(&bye, to).await;
    });
}

fn participant_from(ev: &EventFrame, aor: &str) -> Option<Participant> {
    ev.payload["participants"]
        .as_array()?
        .iter()
        .filter_map(|p| serde_json::from_value::<Participant>(p.clone()).ok())
        .find(|p| p.aor == aor)
}

/// SIP caller, REST callee.
async fn inbound_call(
    shared: Arc<Shared>,
    invite: SipMessage,
    peer: SocketAddr,
    mut rx: mpsc::UnboundedReceiver<SipMessage>,
) {
    let sip_call_id = invite.call_id().to_string();
    InboundCall { shared: shared.clone(), invite, peer, last: None }.run(&mut rx).await;
    shared.dialogs.lock().unwrap().remove(&sip_call_id);
}

struct InboundCall {
    shared: Arc<Shared>,
    invite: SipMessage,
    peer: SocketAddr,
    /// Last response to the INVITE, resent on retransmissions.
    last: Option<SipMessage>,
}

enum Ringing {
    Answered(SessionDescriptor),
    Declined(u16, &'static str),
    CancelledBySip,
}

impl InboundCall {
    async fn answer(&mut self, resp: SipMessage) {
        self.shared.send(&resp, self.peer).await;
        self.last = Some(resp);
    }

    async fn final_status(&mut self, status: u16, reason: &str, tag: &str) {
        let resp = with_to_tag(SipMessage::response_to(&self.invite, status, reason), tag);
        self.answer(resp).await;
    }

    async fn run(mut self, rx: &mut mpsc::UnboundedReceiver<SipMessage>) {
        let shared = self.shared.clone();
        shared.respond(&self.invite, self.peer, 100, "Trying").await;
        let local_tag = shared.tag();
        let callee = self
            .invite
            .uri()
            .and_then(uri_aor)
            .or_else(|| uri_aor(header_uri(self.invite.headers.get("To").unwrap_or_default())));
        let caller = uri_aor(header_uri(self.invite.headers.get("From").unwrap_or_default()));
        let (Some(callee), Some(caller)) = (callee, caller) else {
            return self.final_status(400, "Bad Request", &local_tag).await;
        };
        if !shared.bindings.lock().unwrap().contains_key(&callee) {
            return self.final_status(404, "Not Found", &local_tag).await;
        }
        let offer = match SdpBlob::parse(&self.invite.body).and_then(|s| s.to_descriptor(&shared.registry)) {
            Ok(d) => d,
            Err(SdpError::NoCommonCodec) => {
                return self.final_status(488, "Not Acceptable Here", &local_tag).await;
            }
            Err(_) => return self.final_status(400, "Bad Request", &local_tag).await,
        };
        let Ok(rest) = login(&shared, &caller).await else {
            return self.final_status(403, "Forbidden", &local_tag).await;
        };
        let setup = async {
            let call_id = rest.create_call().await?;
            let conference = format!("/call/{call_id}");
            let events = rest.subscribe(&conference).await?;
            let pid = rest.join(&call_id, &offer).await?;
            let return_path = format!("/login/{caller}");
            let replies = rest.subscribe(&return_path).await?;
            Ok::<_, SdkError>((call_id, conference, events, pid, return_path, replies))
        };
        let Ok((call_id, conference, mut events, pid, return_path, mut replies)) = setup.await else {
            return self.final_status(500, "Server Internal Error", &local_tag).await;
        };
        let invitation = json!({
            "type": "invitation",
            "conference": conference,
            "time": SystemClock.now_ms(),
            "return": return_path,
        });
        if rest.notify(&format!("/login/{callee}"), invitation).await.is_err() {
            let _ = rest.leave(&call_id, &pid).await;
            return self.final_status(480, "Temporarily Unavailable", &local_tag).await;
        }
        self.final_status(180, "Ringing", &local_tag).await;

        let mut dialog = DialogState::new(
            &self.invite.call_id().to_string(),
            header_uri(self.invite.headers.get("To").unwrap_or_default()),
            header_uri(self.invite.headers.get("From").unwrap_or_default()),
            &local_tag,
            header_uri(self.invite.headers.get("Contact").unwrap_or_default()),
        );
        dialog.remote_tag = self.invite.from_tag().map(str::to_string);
        let _ = dialog.accept_remote(self.invite.cseq().map(|(n, _)| n).unwrap_or(1));

        let ring_deadline = Instant::now() + Duration::from_millis(shared.config.ring_timeout_ms);
        let outcome = loop {
            tokio::select! {
                msg = rx.recv() => {
                    let Some(msg) = msg else { return };
                    match msg.method() {
                        Some(Method::Invite) => self.resend_last().await,
                        Some(Method::Cancel) => {
                            shared.respond(&msg, self.peer, 200, "OK").await;
                            break Ringing::CancelledBySip;
                        }
                        _ => {}
                    }
                }
                ev = events.next() => {
                    let Some(ev) = ev else { break Ringing::Declined(480, "Temporarily Unavailable") };
                    if membership(&ev) == Some(("joined", callee.as_str())) {
                        if let Some(p) = participant_from(&ev, &callee) {
                            break Ringing::Answered(p.session);
                        }
                    }
                }
                ev = replies.next() => {
                    let Some(ev) = ev else { continue };
                    if ev.kind == "cancellation" && ev.payload["conference"] == json!(conference) {
                        break match ev.payload["reason"].as_str() {
                            Some("busy") => Ringing::Declined(486, "Busy Here"),
                            Some("rejected") => Ringing::Declined(603, "Decline"),
                            _ => Ringing::Declined(480, "Temporarily Unavailable"),
                        };
                    }
                }
                _ = sleep_until(ring_deadline) => break Ringing::Declined(480, "Temporarily Unavailable"),
            }
        };

        let answer = match outcome {
            Ringing::Answered(session) => session,
            Ringing::Declined(status, reason) => {
                let _ = rest.leave(&call_id, &pid).await;
                if status == 480 {
                    let cancel = json!({ "type": "cancellation", "conference": conference, "reason": "cancelled" });
                    let _ = rest.notify(&format!("/login/{callee}"), cancel).await;
                }
                return self.final_status(status, reason, &local_tag).await;
            }
            Ringing::CancelledBySip => {
                let _ = rest.leave(&call_id, &pid).await;
                let cancel = json!({ "type": "cancellation", "conference": conference, "reason": "cancelled" });
                let _ = rest.notify(&format!("/login/{callee}"), cancel).await;
                return self.final_status(487, "Request Terminated", &local_tag).await;
            }
        };

        let Ok(sdp) = SdpBlob::from_descriptor(&answer, &shared.registry, shared.next(), 1) else {
            let _ = rest.leave(&call_id, &pid).await;
            return self.final_status(488, "Not Acceptable Here", &local_tag).await;
        };
        let ok = with_to_tag(SipMessage::response_to(&self.invite, 200, "OK"), &local_tag)
            .with_header("Contact", format!("<{}>", shared.contact(&callee)))
            .with_body("application/sdp", sdp.to_text().into_bytes());
        self.answer(ok.clone()).await;

        // Resend the 200 until the ACK arrives.
        let start = Instant::now();
        let mut resent = 1;
        let give_up = start + Duration::from_millis(TIMEOUT_MS);
        let acked = loop {
            let next_resend = RETRANSMIT_MS.get(resent).map(|ms| start + Duration::from_millis(*ms));
            let wake = next_resend.unwrap_or(give_up).min(give_up);
            tokio::select! {
                msg = rx.recv() => {
                    let Some(msg) = msg else { return };
                    match msg.method() {
                        Some(Method::Ack) => break true,
                        Some(Method::Invite) => self.resend_last().await,
                        Some(Method::Bye) => {
                            shared.respond(&msg, self.peer, 200, "OK").await;
                            dialog.terminate();
                            let _ = rest.leave(&call_id, &pid).await;
                            return;
                        }
                        _ => {}
                    }
                }
                _ = sleep_until(wake) => {
                    if Instant::now() >= give_up {
                        break false;
                    }
                    shared.send(&ok, self.peer).await;
                    resent += 1;
                }
            }
        };
        dialog.confirm(None);
        if !acked {
            send_bye(&shared, &mut dialog, self.peer).await;
            let _ = rest.leave(&call_id, &pid).await;
            return;
        }

        loop {
            tokio::select! {
                msg = rx.recv() => {
                    let Some(msg) = msg else { return };
                    match msg.method() {
                        Some(Method::Bye) => {
                            let cseq = msg.cseq().map(|(n, _)| n).unwrap_or(0);
                            if dialog.accept_remote(cseq).is_err() {
                                shared.respond(&msg, self.peer, 500, "Server Internal Error").await;
                                continue;
                            }
                            shared.respond(&msg, self.peer, 200, "OK").await;
                            dialog.terminate();
                            let _ = rest.leave(&call_id, &pid).await;
                            return;
                        }
                        Some(Method::Invite) => self.resend_last().await,
                        Some(Method::Ack) | None => {}
                        Some(_) => shared.respond(&msg, self.peer, 501, "Not Implemented").await,
                    }
                }
                ev = events.next() => {
                    let gone = match &ev {
                        None => true,
                        Some(ev) => membership(ev) == Some(("left", callee.as_str())),
                    };
                    if gone {
                        send_bye(&shared, &mut dialog, self.peer).await;
                        let _ = rest.leave(&call_id, &pid).await;
                        return;
                    }
                }
            }
        }
    }

    async fn resend_last(&self) {
        if let Some(last) = &self.last {
            self.shared.send(last, self.peer).await;
        }
    }
}

fn with_to_tag(mut resp: SipMessage, tag: &str) -> SipMessage {
    if let Some(to) = resp.headers.get("To").map(str::to_string) {
        if crate::message::param(&to, "tag").is_none() {
            resp.headers.set("To", format!("{to};tag={tag}"));
        }
    }
    resp
}
