use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::net::{IpAddr, SocketAddr};
use std::sync::{Arc, Mutex, MutexGuard};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use webvoice_core::{EventChannel, EventReceiver, EventSender, SharedClock, TransportCandidate};
use webvoice_media::{
    CodecRegistry, FrameClock, MediaFrame, MediaKind, PatternSource, RtpPacket, RtpStream, SenderReport,
    StatsSink, ToneSource,
};

use crate::approval::{ApprovalKind, ApprovalPolicy, ApprovalRequest, Decision};
use crate::error::AdaptorError;
use crate::ice::{CheckMessage, IceAgent, IceConfig, IceOutput, IcePhase};
use crate::net::{BindError, DatagramSink, NetworkBackend};
use crate::objects::{
    Generator, IceState, Object, ObjectClass, Pipeline, RtpState, SinkRef, SinkState, SourceState, State, TcpState,
    UdpState, INBOX_LIMIT,
};
use crate::token::{new_token, TokenFile};

type Result<T> = std::result::Result<T, AdaptorError>;

#[derive(Debug, Clone)]
pub struct AdaptorConfig {
    pub token_ttl_ms: u64,
    pub event_queue: usize,
    pub ice: IceConfig,
    pub rtcp_interval_ms: u64,
    /// Frames a source may emit in one tick after a stall; older ones are dropped.
    pub max_catchup_frames: u64,
    /// Seeds identifiers, SSRCs and transaction ids for reproducible runs.
    pub seed: Option<u64>,
    pub token_file: Option<TokenFile>,
}

impl Default for AdaptorConfig {
    fn default() -> Self {
        Self {
            token_ttl_ms: 24 * 3600 * 1000,
            event_queue: 1024,
            ice: IceConfig::default(),
            rtcp_interval_ms: 5_000,
            max_catchup_frames: 250,
            seed: None,
            token_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthGrant {
    pub token: String,
    /// Milliseconds on the adaptor clock; `None` for a permanent token.
    pub expires_at: Option<u64>,
    pub permanent: bool,
}

struct TokenEntry {
    app_id: String,
    expires_at: Option<u64>,
    events: EventSender,
    pending: Option<EventReceiver>,
    once: HashSet<(ApprovalKind, String)>,
    scope: BTreeSet<String>,
}

struct Inner {
    rng: StdRng,
    tokens: HashMap<String, TokenEntry>,
    always: HashSet<(String, ApprovalKind, String)>,
    objects: BTreeMap<String, Object>,
    ports: HashMap<u16, String>,
    pipelines: BTreeMap<String, Pipeline>,
    next_object: u64,
    next_pipeline: u64,
    outbound: u64,
}

/// The adaptor core: token scopes, approval gating, transport and media
/// objects. Protocol work happens in `invoke`, `on_datagram` and `tick`;
/// the HTTP layer and the socket backend sit on either side.
pub struct Adaptor {
    inner: Mutex<Inner>,
    policy: Arc<dyn ApprovalPolicy>,
    backend: Arc<dyn NetworkBackend>,
    clock: SharedClock,
    config: AdaptorConfig,
    codecs: CodecRegistry,
}

fn resource(id: &str) -> String {
    format!("/objects/{id}")
}

fn arg_str<'a>(args: &'a Value, key: &str) -> Result<&'a str> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| AdaptorError::BadRequest(format!("missing string argument {key:?}")))
}

fn arg_addr(args: &Value, key: &str) -> Result<SocketAddr> {
    arg_str(args, key)?
        .parse()
        .map_err(|_| AdaptorError::BadRequest(format!("{key:?} must be ip:port")))
}

fn arg_data(args: &Value) -> Result<Vec<u8>> {
    B64.decode(arg_str(args, "data")?)
        .map_err(|_| AdaptorError::BadRequest("data must be base64".into()))
}

fn arg_candidates(args: &Value) -> Result<Vec<TransportCandidate>> {
    let raw = args
        .get("candidates")
        .cloned()
        .ok_or_else(|| AdaptorError::BadRequest("missing candidates".into()))?;
    serde_json::from_value(raw).map_err(|e| AdaptorError::BadRequest(format!("candidates: {e}")))
}

fn bind_error(e: BindError) -> AdaptorError {
    match e {
        BindError::InUse(p) => AdaptorError::Conflict(format!("port {p} is in use")),
        BindError::Io(e) => AdaptorError::Internal(e.to_string()),
    }
}

fn wrong_state(e: impl std::fmt::Display) -> AdaptorError {
    AdaptorError::Conflict(e.to_string())
}

impl Inner {
    fn token(&self, token: &str, now: u64) -> Result<&TokenEntry> {
        self.tokens
            .get(token)
            .filter(|t| t.expires_at.is_none_or(|e| now < e))
            .ok_or(AdaptorError::Unauthorized)
    }

    fn is_approved(&self, token: &str, kind: ApprovalKind, subject: &str) -> bool {
        let Some(t) = self.tokens.get(token) else {
            return false;
        };
        t.once.contains(&(kind, subject.to_string()))
            || self.always.contains(&(t.app_id.clone(), kind, subject.to_string()))
    }

    fn owned(&self, token: &str, id: &str) -> Result<&Object> {
        let obj = self
            .objects
            .get(id)
            .ok_or_else(|| AdaptorError::NotFound(resource(id)))?;
        if obj.token != token {
            return Err(AdaptorError::Forbidden(format!("{id} belongs to another application")));
        }
        Ok(obj)
    }

    fn next_id(&mut self) -> String {
        self.next_object += 1;
        format!("o{}", self.next_object)
    }

    fn emit(&self, token: &str, kind: &str, object: &str, now: u64, mut payload: Value) {
        if let Some(t) = self.tokens.get(token) {
            payload["object"] = json!(object);
            let _ = t.events.send(kind, &resource(object), now, payload);
        }
    }

    /// The only path by which a datagram leaves the host. Drops anything
    /// addressed to a peer that was never approved for this token's app.
    fn transmit(&mut self, backend: &dyn NetworkBackend, token: &str, port: u16, to: SocketAddr, data: &[u8]) -> bool {
        if !self.is_approved(token, ApprovalKind::SendToNewPeer, &to.ip().to_string()) {
            return false;
        }
        if backend.send_udp(port, to, data).is_err() {
            return false;
        }
        self.outbound += 1;
        if let Some(id) = self.ports.get(&port).cloned() {
            if let Some(Object { state: State::Udp(u), .. }) = self.objects.get_mut(&id) {
                u.bytes_out += data.len() as u64;
                u.packets_out += 1;
                u.peers.insert(to);
            }
        }
        true
    }

    fn insert(&mut self, obj: Object) {
        if let State::Udp(u) = &obj.state {
            self.ports.insert(u.port, obj.id.clone());
        }
        if let Some(t) = self.tokens.get_mut(&obj.token) {
            t.scope.insert(obj.id.clone());
        }
        self.objects.insert(obj.id.clone(), obj);
    }

    fn close_recursive(&mut self, backend: &dyn NetworkBackend, id: &str) {
        let Some(obj) = self.objects.remove(id) else {
            return;
        };
        if let Some(t) = self.tokens.get_mut(&obj.token) {
            t.scope.remove(id);
        }
        self.pipelines
            .retain(|_, p| p.source != id && p.sink != SinkRef::Object(id.to_string()));
        match obj.state {
            State::Udp(u) => {
                backend.close_udp(u.port);
                self.ports.remove(&u.port);
            }
            State::Rtp(r) => {
                self.close_recursive(backend, &r.rtp);
                self.close_recursive(backend, &r.rtcp);
            }
            State::Ice(i) => {
                for c in i.components {
                    self.close_recursive(backend, &c);
                }
            }
            _ => {}
        }
    }

    /// Applies ICE agent output for `ice_id`.
    fn apply_ice(&mut self, backend: &dyn NetworkBackend, ice_id: &str, token: &str, outputs: Vec<IceOutput>, now: u64) {
        for output in outputs {
            match output {
                IceOutput::Send { local_port, to, data } => {
                    self.transmit(backend, token, local_port, to, &data);
                }
                IceOutput::Phase { phase, detail } => {
                    let mut payload = detail;
                    payload["phase"] = json!(phase);
                    self.emit(token, "ice-phase", ice_id, now, payload);
                    if phase == IcePhase::Connected {
                        self.on_ice_connected(ice_id);
                    }
                }
                IceOutput::PingResult { remote, rtt_ms } => {
                    self.emit(token, "ice-ping", ice_id, now, json!({ "remote": remote, "rtt_ms": rtt_ms }));
                }
            }
        }
    }

    /// Points RTP components at the selected remote address.
    fn on_ice_connected(&mut self, ice_id: &str) {
        let Some(Object { state: State::Ice(ice), .. }) = self.objects.get(ice_id) else {
            return;
        };
        let Some(sel) = ice.agent.selected() else {
            return;
        };
        let comps = ice.components.clone();
        for c in comps {
            if let Some(Object { state: State::Rtp(r), .. }) = self.objects.get_mut(&c) {
                if r.rtp_port == sel.local_port {
                    r.remote = Some(sel.remote);
                }
            }
        }
    }

    /// ICE object that runs checks on the socket `udp_id`, if any.
    fn ice_for_socket(&self, udp_id: &str) -> Option<String> {
        let parent = self.objects.get(udp_id)?.parent.clone()?;
        match &self.objects.get(&parent)?.state {
            State::Ice(_) => Some(parent),
            State::Rtp(r) if r.rtp == udp_id => {
                let grand = self.objects.get(&parent)?.parent.clone()?;
                matches!(self.objects.get(&grand)?.state, State::Ice(_)).then_some(grand)
            }
            _ => None,
        }
    }

    fn deliver_frame(&mut self, backend: &dyn NetworkBackend, source_id: &str, frame: &MediaFrame, now: u64) {
        let pipelines: Vec<Pipeline> = self
            .pipelines
            .values()
            .filter(|p| p.source == source_id)
            .cloned()
            .collect();
        for p in pipelines {
            match &p.sink {
                SinkRef::Client => {
                    let payload = json!({
                        "pipeline": p.id,
                        "kind": frame.kind,
                        "timestamp": frame.timestamp,
                        "index": frame.index,
                        "data": B64.encode(&frame.data),
                    });
                    self.emit(&p.token, "media-frame", source_id, now, payload);
                }
                SinkRef::Object(sink_id) => match self.objects.get_mut(sink_id).map(|o| &mut o.state) {
                    Some(State::Sink(s)) => s.sink.on_packet(frame.index as u16, frame.data.len()),
                    Some(State::Rtp(r)) => {
                        let (Some(remote), Some(stream)) = (r.remote, r.stream.as_mut()) else {
                            continue;
                        };
                        let bytes = stream.packetize(frame).serialize();
                        let port = r.rtp_port;
                        self.transmit(backend, &p.token, port, remote, &bytes);
                    }
                    _ => {}
                },
            }
        }
    }

    fn deliver_rtp(&mut self, rtp_id: &str, packet: &RtpPacket, now: u64) {
        let pipelines: Vec<Pipeline> = self
            .pipelines
            .values()
            .filter(|p| p.source == rtp_id)
            .cloned()
            .collect();
        for p in pipelines {
            match &p.sink {
                SinkRef::Client => {
                    let payload = json!({
                        "pipeline": p.id,
                        "payload_type": packet.payload_type,
                        "seq": packet.seq,
                        "timestamp": packet.timestamp,
                        "data": B64.encode(&packet.payload),
                    });
                    self.emit(&p.token, "media-frame", rtp_id, now, payload);
                }
                SinkRef::Object(sink_id) => {
                    if let Some(Object { state: State::Sink(s), .. }) = self.objects.get(sink_id) {
                        s.sink.on_packet(packet.seq, packet.payload.len());
                    }
                }
            }
        }
    }
}

/// Approvals an `invoke` needs before it can run.
struct Plan {
    hard: Vec<(ApprovalKind, String)>,
    soft: Vec<(ApprovalKind, String)>,
}

impl Adaptor {
    pub fn new(
        config: AdaptorConfig,
        clock: SharedClock,
        backend: Arc<dyn NetworkBackend>,
        policy: Arc<dyn ApprovalPolicy>,
    ) -> std::io::Result<Arc<Self>> {
        let seed = config.seed.unwrap_or_else(rand::random);
        let mut inner = Inner {
            rng: StdRng::seed_from_u64(seed),
            tokens: HashMap::new(),
            always: HashSet::new(),
            objects: BTreeMap::new(),
            ports: HashMap::new(),
            pipelines: BTreeMap::new(),
            next_object: 0,
            next_pipeline: 0,
            outbound: 0,
        };
        if let Some(file) = &config.token_file {
            for (token, app_id) in file.load()? {
                let (events, pending) = EventChannel::bounded(config.event_queue);
                inner
                    .always
                    .insert((app_id.clone(), ApprovalKind::AppConnect, app_id.clone()));
                inner.tokens.insert(
                    token,
                    TokenEntry {
                        app_id,
                        expires_at: None,
                        events,
                        pending: Some(pending),
                        once: HashSet::new(),
                        scope: BTreeSet::new(),
                    },
                );
            }
        }
        let adaptor = Arc::new(Self {
            inner: Mutex::new(inner),
            policy,
            backend,
            clock,
            config,
            codecs: CodecRegistry::default(),
        });
        let weak = Arc::downgrade(&adaptor);
        adaptor.backend.attach(weak);
        Ok(adaptor)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap()
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    /// Datagrams sent by this adaptor since start.
    pub fn outbound_datagrams(&self) -> u64 {
        self.lock().outbound
    }

    fn persist_permanent(&self, inner: &Inner) {
        let Some(file) = &self.config.token_file else {
            return;
        };
        let permanent: BTreeMap<String, String> = inner
            .tokens
            .iter()
            .filter(|(_, t)| t.expires_at.is_none())
            .map(|(k, t)| (k.clone(), t.app_id.clone()))
            .collect();
        if let Err(e) = file.save(&permanent) {
            tracing::warn!(error = %e, "failed to write token file");
        }
    }

    /// Issues or refreshes an application token. A valid `prior` token for
    /// the same app is refreshed without asking; anything else prompts.
    pub fn authenticate(&self, app_id: &str, prior: Option<&str>) -> Result<AuthGrant> {
        if app_id.is_empty() {
            return Err(AdaptorError::BadRequest("app_id is required".into()));
        }
        let now = self.now_ms();
        let pre_approved = {
            let mut inner = self.lock();
            if let Some(token) = prior {
                let ttl = self.config.token_ttl_ms;
                if let Ok(t) = inner.token(token, now) {
                    if t.app_id == app_id {
                        let entry = inner.tokens.get_mut(token).expect("validated");
                        if let Some(exp) = entry.expires_at.as_mut() {
                            *exp = now + ttl;
                        }
                        return Ok(AuthGrant {
                            token: token.to_string(),
                            expires_at: entry.expires_at,
                            permanent: entry.expires_at.is_none(),
                        });
                    }
                }
            }
            inner
                .always
                .contains(&(app_id.to_string(), ApprovalKind::AppConnect, app_id.to_string()))
        };
        let decision = if pre_approved {
            Decision::AllowAlways
        } else {
            self.policy.decide(&ApprovalRequest {
                kind: ApprovalKind::AppConnect,
                app_id: app_id.to_string(),
                subject: app_id.to_string(),
            })
        };
        if decision == Decision::Deny {
            return Err(AdaptorError::Forbidden(format!("connection from {app_id} denied")));
        }
        let mut inner = self.lock();
        let token = new_token(&mut inner.rng);
        let permanent = decision == Decision::AllowAlways;
        let expires_at = (!permanent).then_some(now + self.config.token_ttl_ms);
        let (events, pending) = EventChannel::bounded(self.config.event_queue);
        if permanent {
            inner
                .always
                .insert((app_id.to_string(), ApprovalKind::AppConnect, app_id.to_string()));
        }
        inner.tokens.insert(
            token.clone(),
            TokenEntry {
                app_id: app_id.to_string(),
                expires_at,
                events,
                pending: Some(pending),
                once: HashSet::new(),
                scope: BTreeSet::new(),
            },
        );
        if permanent {
            self.persist_permanent(&inner);
        }
        Ok(AuthGrant {
            token,
            expires_at,
            permanent,
        })
    }

    /// Notification stream for `token`. Events raised before the first call
    /// are buffered; a later call replaces the stream.
    pub fn events(&self, token: &str) -> Result<EventReceiver> {
        let now = self.now_ms();
        let mut inner = self.lock();
        inner.token(token, now)?;
        let entry = inner.tokens.get_mut(token).expect("validated");
        if let Some(rx) = entry.pending.take() {
            return Ok(rx);
        }
        let (tx, rx) = EventChannel::bounded(self.config.event_queue);
        entry.events.close();
        entry.events = tx;
        Ok(rx)
    }

    /// Resolves one approval, consulting the caches first. Runs the policy
    /// without holding the lock.
    fn approve(&self, token: &str, kind: ApprovalKind, subject: &str) -> Result<bool> {
        let now = self.now_ms();
        let app_id = {
            let inner = self.lock();
            let t = inner.token(token, now)?;
            if inner.is_approved(token, kind, subject) {
                return Ok(true);
            }
            t.app_id.clone()
        };
        let decision = self.policy.decide(&ApprovalRequest {
            kind,
            app_id: app_id.clone(),
            subject: subject.to_string(),
        });
        let mut inner = self.lock();
        match decision {
            Decision::AllowOnce => {
                if let Some(t) = inner.tokens.get_mut(token) {
                    t.once.insert((kind, subject.to_string()));
                }
                Ok(true)
            }
            Decision::AllowAlways => {
                inner.always.insert((app_id, kind, subject.to_string()));
                Ok(true)
            }
            Decision::Deny => Ok(false),
        }
    }

    fn require(&self, token: &str, kind: ApprovalKind, subject: &str) -> Result<()> {
        if self.approve(token, kind, subject)? {
            Ok(())
        } else {
            Err(AdaptorError::Forbidden(format!("{} for {subject} denied", kind.as_str())))
        }
    }

    pub fn list_objects(&self, token: &str) -> Result<Vec<Value>> {
        let now = self.now_ms();
        let inner = self.lock();
        let t = inner.token(token, now)?;
        Ok(t.scope
            .iter()
            .filter_map(|id| inner.objects.get(id))
            .map(Object::describe)
            .collect())
    }

    pub fn describe(&self, token: &str, id: &str) -> Result<Value> {
        let now = self.now_ms();
        let inner = self.lock();
        inner.token(token, now)?;
        Ok(inner.owned(token, id)?.describe())
    }

    /// Sink statistics for the harness and tests.
    pub fn sink_handle(&self, token: &str, id: &str) -> Result<Arc<StatsSink>> {
        let now = self.now_ms();
        let inner = self.lock();
        inner.token(token, now)?;
        match &inner.owned(token, id)?.state {
            State::Sink(s) => Ok(s.sink.clone()),
            _ => Err(AdaptorError::Conflict(format!("{id} is not a sink"))),
        }
    }

    pub fn create_object(&self, token: &str, class: &str, params: Value) -> Result<Value> {
        let now = self.now_ms();
        self.lock().token(token, now)?;
        let class = ObjectClass::parse(class)
            .ok_or_else(|| AdaptorError::BadRequest(format!("unknown class {class:?}")))?;
        let params = if params.is_null() { json!({}) } else { params };
        match class {
            ObjectClass::UdpTransport | ObjectClass::RtpTransport => {
                let fresh = !(class == ObjectClass::RtpTransport && params.get("rtp").is_some());
                if fresh {
                    self.require(token, ApprovalKind::Bind, "udp")?;
                }
            }
            ObjectClass::IceTransport => {
                if params.get("components").is_none() {
                    self.require(token, ApprovalKind::Bind, "udp")?;
                }
            }
            ObjectClass::Microphone => self.require(token, ApprovalKind::MediaCapture, "microphone")?,
            ObjectClass::Camera => self.require(token, ApprovalKind::MediaCapture, "camera")?,
            ObjectClass::TcpTransport => {
                let to = arg_addr(&params, "to")?;
                self.require(token, ApprovalKind::SendToNewPeer, &to.ip().to_string())?;
            }
            ObjectClass::Speaker | ObjectClass::Display => {}
        }
        // TCP connects outside the lock.
        let tcp = if class == ObjectClass::TcpTransport {
            let to = arg_addr(&params, "to")?;
            let conn = self.backend.connect_tcp(to).map_err(|e| match e.kind() {
                std::io::ErrorKind::Unsupported => AdaptorError::Conflict(e.to_string()),
                _ => AdaptorError::Internal(format!("connect {to}: {e}")),
            })?;
            Some((to, conn))
        } else {
            None
        };

        let mut inner = self.lock();
        inner.token(token, now)?;
        let backend = self.backend.as_ref();
        let id = match class {
            ObjectClass::UdpTransport => {
                let port = match params.get("port") {
                    None | Some(Value::Null) => 0,
                    Some(v) => v
                        .as_u64()
                        .filter(|p| *p == 0 || (1025..=65535).contains(p))
                        .ok_or_else(|| AdaptorError::BadRequest("port must be 0 or 1025..=65535".into()))?
                        as u16,
                };
                let bound = backend.bind_udp(port).map_err(bind_error)?;
                let id = inner.next_id();
                inner.insert(Object {
                    id: id.clone(),
                    class,
                    token: token.to_string(),
                    parent: None,
                    state: State::Udp(UdpState {
                        port: bound,
                        ..Default::default()
                    }),
                });
                id
            }
            ObjectClass::RtpTransport => self.create_rtp(&mut inner, token, &params, now)?,
            ObjectClass::IceTransport => {
                let components: Vec<String> = match params.get("components") {
                    Some(v) => serde_json::from_value(v.clone())
                        .map_err(|_| AdaptorError::BadRequest("components must be a list of object ids".into()))?,
                    None => {
                        let port = backend.bind_udp(0).map_err(bind_error)?;
                        let id = inner.next_id();
                        inner.insert(Object {
                            id: id.clone(),
                            class: ObjectClass::UdpTransport,
                            token: token.to_string(),
                            parent: None,
                            state: State::Udp(UdpState {
                                port,
                                ..Default::default()
                            }),
                        });
                        vec![id]
                    }
                };
                if components.is_empty() {
                    return Err(AdaptorError::BadRequest("an ICE transport needs components".into()));
                }
                let unique: HashSet<&String> = components.iter().collect();
                if unique.len() != components.len() {
                    return Err(AdaptorError::BadRequest("duplicate component".into()));
                }
                for c in &components {
                    let obj = inner.owned(token, c)?;
                    if !matches!(
                        obj.class,
                        ObjectClass::UdpTransport | ObjectClass::RtpTransport | ObjectClass::TcpTransport
                    ) {
                        return Err(AdaptorError::BadRequest(format!("{c} is not a transport")));
                    }
                    if let Some(p) = &obj.parent {
                        return Err(AdaptorError::Conflict(format!("{c} already belongs to {p}")));
                    }
                }
                let id = inner.next_id();
                for c in &components {
                    inner.objects.get_mut(c).expect("checked").parent = Some(id.clone());
                }
                let prefix: u32 = inner.rng.random();
                inner.insert(Object {
                    id: id.clone(),
                    class,
                    token: token.to_string(),
                    parent: None,
                    state: State::Ice(IceState {
                        agent: IceAgent::new(self.config.ice, prefix),
                        components,
                    }),
                });
                id
            }
            ObjectClass::TcpTransport => {
                let (remote, conn) = tcp.expect("connected above");
                let secure = params.get("secure").and_then(Value::as_bool).unwrap_or(false);
                let id = inner.next_id();
                inner.insert(Object {
                    id: id.clone(),
                    class,
                    token: token.to_string(),
                    parent: None,
                    state: State::Tcp(TcpState {
                        remote,
                        secure,
                        conn,
                        bytes_out: 0,
                    }),
                });
                id
            }
            ObjectClass::Microphone | ObjectClass::Camera => {
                let generator = if class == ObjectClass::Microphone {
                    let frequency = params.get("frequency").and_then(Value::as_f64).unwrap_or(440.0);
                    let source =
                        ToneSource::new(frequency).map_err(|e| AdaptorError::BadRequest(e.to_string()))?;
                    Generator::Tone { source, frequency }
                } else {
                    let fps = params.get("fps").and_then(Value::as_u64).unwrap_or(25) as u32;
                    let source = PatternSource::new(fps).map_err(|e| AdaptorError::BadRequest(e.to_string()))?;
                    Generator::Pattern { source, fps }
                };
                let mut generator = generator;
                let interval = generator.source().frame_interval_ms();
                let codec = generator.source().codec().to_string();
                let id = inner.next_id();
                inner.insert(Object {
                    id: id.clone(),
                    class,
                    token: token.to_string(),
                    parent: None,
                    state: State::Source(SourceState {
                        generator,
                        codec,
                        clock: FrameClock::new(now, interval),
                        running: true,
                        frames: 0,
                    }),
                });
                id
            }
            ObjectClass::Speaker | ObjectClass::Display => {
                let kind = if class == ObjectClass::Speaker {
                    MediaKind::Audio
                } else {
                    MediaKind::Video
                };
                let id = inner.next_id();
                inner.insert(Object {
                    id: id.clone(),
                    class,
                    token: token.to_string(),
                    parent: None,
                    state: State::Sink(SinkState {
                        kind,
                        sink: Arc::new(StatsSink::new()),
                    }),
                });
                id
            }
        };
        Ok(inner.objects[&id].describe())
    }

    fn create_rtp(&self, inner: &mut Inner, token: &str, params: &Value, now: u64) -> Result<String> {
        let backend = self.backend.as_ref();
        let (rtp, rtcp, rtp_port, rtcp_port) = if let Some(rtp) = params.get("rtp").and_then(Value::as_str) {
            let rtcp = arg_str(params, "rtcp")?;
            let port_of = |inner: &Inner, id: &str| -> Result<u16> {
                let obj = inner.owned(token, id)?;
                if let Some(p) = &obj.parent {
                    return Err(AdaptorError::Conflict(format!("{id} already belongs to {p}")));
                }
                match &obj.state {
                    State::Udp(u) => Ok(u.port),
                    _ => Err(AdaptorError::BadRequest(format!("{id} is not a UDP transport"))),
                }
            };
            let (p, q) = (port_of(inner, rtp)?, port_of(inner, rtcp)?);
            if u32::from(q) != u32::from(p) + 1 {
                return Err(AdaptorError::BadRequest(format!("rtcp port {q} must be rtp port {p} + 1")));
            }
            (rtp.to_string(), rtcp.to_string(), p, q)
        } else {
            let requested = params.get("port").and_then(Value::as_u64).unwrap_or(0);
            if requested != 0 && !(1025..65535).contains(&requested) {
                return Err(AdaptorError::BadRequest("port must be 0 or 1025..65535".into()));
            }
            let mut attempt = 0;
            let (p, q) = loop {
                attempt += 1;
                let p = if requested == 0 {
                    inner.rng.random_range(8_192u16..32_767) * 2
                } else {
                    requested as u16
                };
                let bound = match backend.bind_udp(p) {
                    Ok(b) => b,
                    Err(e) if requested != 0 || attempt >= 64 => return Err(bind_error(e)),
                    Err(_) => continue,
                };
                match backend.bind_udp(bound + 1) {
                    Ok(q) => break (bound, q),
                    Err(e) => {
                        backend.close_udp(bound);
                        if requested != 0 || attempt >= 64 {
                            return Err(bind_error(e));
                        }
                    }
                }
            };
            let mut ids = Vec::new();
            for port in [p, q] {
                let id = inner.next_id();
                inner.insert(Object {
                    id: id.clone(),
                    class: ObjectClass::UdpTransport,
                    token: token.to_string(),
                    parent: None,
                    state: State::Udp(UdpState {
                        port,
                        ..Default::default()
                    }),
                });
                ids.push(id);
            }
            (ids[0].clone(), ids[1].clone(), p, q)
        };
        let id = inner.next_id();
        for member in [&rtp, &rtcp] {
            inner.objects.get_mut(member).expect("exists").parent = Some(id.clone());
        }
        let (ssrc, initial_seq, timestamp_offset) = (inner.rng.random(), inner.rng.random(), inner.rng.random());
        inner.insert(Object {
            id: id.clone(),
            class: ObjectClass::RtpTransport,
            token: token.to_string(),
            parent: None,
            state: State::Rtp(RtpState {
                rtp,
                rtcp,
                rtp_port,
                rtcp_port,
                ssrc,
                initial_seq,
                timestamp_offset,
                remote: None,
                stream: None,
                next_rtcp: now + self.config.rtcp_interval_ms,
                packets_in: 0,
                bytes_in: 0,
                reports_sent: 0,
                last_report: None,
            }),
        });
        Ok(id)
    }

    pub fn close_object(&self, token: &str, id: &str) -> Result<()> {
        let now = self.now_ms();
        let mut inner = self.lock();
        inner.token(token, now)?;
        let obj = inner.owned(token, id)?;
        if let Some(p) = &obj.parent {
            return Err(AdaptorError::Conflict(format!("{id} is part of {p}; close that instead")));
        }
        inner.close_recursive(self.backend.as_ref(), id);
        Ok(())
    }

    fn plan(&self, obj: &Object, method: &str, args: &Value) -> Result<Plan> {
        let mut plan = Plan {
            hard: Vec::new(),
            soft: Vec::new(),
        };
        let peer = |addr: SocketAddr| (ApprovalKind::SendToNewPeer, addr.ip().to_string());
        match (&obj.state, method) {
            (State::Udp(_), "send") => plan.hard.push(peer(arg_addr(args, "to")?)),
            (State::Rtp(_), "set_remote") => plan.hard.push(peer(arg_addr(args, "remote")?)),
            (State::Ice(_), "gather") => {
                if let Some(r) = self.backend.reflector() {
                    plan.soft.push(peer(r));
                }
            }
            (State::Ice(i), "start_checks") => {
                for c in i.agent.remote_candidates() {
                    plan.soft.push(peer(c.socket_addr()));
                }
            }
            (State::Ice(_), "run") => {
                for c in arg_candidates(args)? {
                    plan.soft.push(peer(c.socket_addr()));
                }
            }
            (_, "connect") => {
                if args.get("sink").and_then(Value::as_str) == Some("client") {
                    plan.hard
                        .push((ApprovalKind::MediaToClient, obj.class.as_str().to_ascii_lowercase()));
                }
            }
            _ => {}
        }
        plan.soft.sort();
        plan.soft.dedup();
        Ok(plan)
    }

    /// Calls `method` on object `id` under `token`.
    pub fn invoke(&self, token: &str, id: &str, method: &str, args: Value) -> Result<Value> {
        let now = self.now_ms();
        let args = if args.is_null() { json!({}) } else { args };
        let plan = {
            let inner = self.lock();
            inner.token(token, now)?;
            let obj = inner.owned(token, id)?;
            self.plan(obj, method, &args)?
        };
        for (kind, subject) in &plan.hard {
            self.require(token, *kind, subject)?;
        }
        let mut denied = HashSet::new();
        for (kind, subject) in &plan.soft {
            if !self.approve(token, *kind, subject)? {
                if let Ok(ip) = subject.parse::<IpAddr>() {
                    denied.insert(ip);
                }
            }
        }
        match method {
            "close" => return self.close_object(token, id).map(|_| json!({ "closed": id })),
            "connect" => {
                let sink = arg_str(&args, "sink")?;
                return self.connect_objects(token, id, sink);
            }
            "disconnect" => {
                let pipeline = arg_str(&args, "pipeline")?;
                let mut inner = self.lock();
                let owned = inner
                    .pipelines
                    .get(pipeline)
                    .is_some_and(|p| p.token == token && p.source == id);
                if !owned {
                    return Err(AdaptorError::NotFound(format!("pipeline {pipeline}")));
                }
                inner.pipelines.remove(pipeline);
                return Ok(json!({ "disconnected": pipeline }));
            }
            _ => {}
        }

        let mut inner = self.lock();
        inner.token(token, now)?;
        inner.owned(token, id)?;
        let backend = self.backend.as_ref();
        let class = inner.objects[id].class;
        match (class, method) {
            (_, "state") | (_, "stats") => Ok(inner.objects[id].describe()),
            (ObjectClass::UdpTransport, "send") => {
                let to = arg_addr(&args, "to")?;
                let data = arg_data(&args)?;
                let port = match &inner.objects[id].state {
                    State::Udp(u) => u.port,
                    _ => unreachable!(),
                };
                let queued = inner.transmit(backend, token, port, to, &data);
                Ok(json!({ "queued": queued, "bytes": data.len() }))
            }
            (ObjectClass::UdpTransport, "recv-poll") => {
                let max = args.get("max").and_then(Value::as_u64).unwrap_or(64) as usize;
                let Some(Object { state: State::Udp(u), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                let n = max.min(u.inbox.len());
                let items: Vec<Value> = u
                    .inbox
                    .drain(..n)
                    .map(|(from, data)| json!({ "from": from, "data": B64.encode(data) }))
                    .collect();
                Ok(json!({ "datagrams": items }))
            }
            (ObjectClass::TcpTransport, "send") => {
                let data = arg_data(&args)?;
                let Some(Object { state: State::Tcp(t), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                t.conn
                    .send(&data)
                    .map_err(|e| AdaptorError::Conflict(format!("tcp send failed: {e}")))?;
                t.bytes_out += data.len() as u64;
                Ok(json!({ "queued": true, "bytes": data.len() }))
            }
            (ObjectClass::IceTransport, "gather") => self.ice_gather(&mut inner, token, id, &denied, now),
            (ObjectClass::IceTransport, "set_remote_candidates") => {
                let cands = arg_candidates(&args)?;
                let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                let n = i.agent.set_remote_candidates(cands).map_err(ice_error)?;
                Ok(json!({ "pairs": n }))
            }
            (ObjectClass::IceTransport, "start_checks") => {
                let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                let out = i.agent.start_checks(now, &denied).map_err(ice_error)?;
                inner.apply_ice(backend, id, token, out, now);
                Ok(inner.objects[id].describe())
            }
            (ObjectClass::IceTransport, "run") => {
                let cands = arg_candidates(&args)?;
                let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                i.agent.set_remote_candidates(cands).map_err(ice_error)?;
                let out = i.agent.start_checks(now, &denied).map_err(ice_error)?;
                inner.apply_ice(backend, id, token, out, now);
                Ok(inner.objects[id].describe())
            }
            (ObjectClass::IceTransport, "send") => {
                let data = arg_data(&args)?;
                let Some(Object { state: State::Ice(i), .. }) = inner.objects.get(id) else {
                    unreachable!()
                };
                let sel = match (i.agent.phase(), i.agent.selected()) {
                    (IcePhase::Connected, Some(sel)) => sel,
                    (phase, _) => {
                        return Err(AdaptorError::Conflict(format!("send is invalid in phase {}", phase.as_str())))
                    }
                };
                let queued = inner.transmit(backend, token, sel.local_port, sel.remote, &data);
                Ok(json!({ "queued": queued, "bytes": data.len() }))
            }
            (ObjectClass::IceTransport, "ping") => {
                let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                if i.agent.phase() != IcePhase::Connected {
                    return Err(AdaptorError::Conflict(format!("ping is invalid in phase {}", i.agent.phase().as_str())));
                }
                let out = i.agent.ping_selected(now).map_err(ice_error)?;
                inner.apply_ice(backend, id, token, out, now);
                Ok(json!({ "sent": true }))
            }
            (ObjectClass::RtpTransport, "set_remote") => {
                let remote = arg_addr(&args, "remote")?;
                let Some(Object { state: State::Rtp(r), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                r.remote = Some(remote);
                Ok(inner.objects[id].describe())
            }
            (ObjectClass::Microphone | ObjectClass::Camera, "start" | "stop") => {
                let Some(Object { state: State::Source(s), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                let running = method == "start";
                if running && !s.running {
                    // Resume without a burst of catch-up frames.
                    let interval = s.generator.source().frame_interval_ms();
                    s.clock = FrameClock::new(now, interval);
                }
                s.running = running;
                Ok(inner.objects[id].describe())
            }
            (ObjectClass::Microphone | ObjectClass::Camera, "set-attribute") => {
                let name = arg_str(&args, "name")?.to_string();
                let value = args.get("value").cloned().unwrap_or(Value::Null);
                let codecs = &self.codecs;
                let Some(Object { state: State::Source(s), .. }) = inner.objects.get_mut(id) else {
                    unreachable!()
                };
                match (name.as_str(), &mut s.generator) {
                    ("volume", Generator::Tone { source, .. }) => {
                        let v = value
                            .as_u64()
                            .filter(|v| *v <= i16::MAX as u64)
                            .ok_or_else(|| AdaptorError::BadRequest("volume must be 0..=32767".into()))?;
                        source.set_amplitude(v as i16);
                    }
                    ("frequency", Generator::Tone { source, frequency }) => {
                        let f = value
                            .as_f64()
                            .ok_or_else(|| AdaptorError::BadRequest("frequency must be a number".into()))?;
                        let amplitude = source.amplitude();
                        *source = ToneSource::with_amplitude(f, amplitude)
                            .map_err(|e| AdaptorError::BadRequest(e.to_string()))?;
                        *frequency = f;
                    }
                    ("codec", generator) => {
                        let name = value
                            .as_str()
                            .ok_or_else(|| AdaptorError::BadRequest("codec must be a string".into()))?;
                        let codec = codecs
                            .by_name(name)
                            .ok_or_else(|| AdaptorError::BadRequest(format!("unknown codec {name}")))?;
                        if codec.kind != generator.kind() {
                            return Err(AdaptorError::BadRequest(format!("{name} does not carry this media kind")));
                        }
                        s.codec = name.to_string();
                    }
                    (other, _) => return Err(AdaptorError::BadRequest(format!("unknown attribute {other}"))),
                }
                Ok(inner.objects[id].describe())
            }
            (ObjectClass::Speaker | ObjectClass::Display, "reset") => {
                let Some(Object { state: State::Sink(s), .. }) = inner.objects.get(id) else {
                    unreachable!()
                };
                s.sink.reset();
                Ok(inner.objects[id].describe())
            }
            (class, method) => Err(AdaptorError::Conflict(format!(
                "{} does not support {method:?}",
                class.as_str()
            ))),
        }
    }

    fn ice_gather(&self, inner: &mut Inner, token: &str, id: &str, denied: &HashSet<IpAddr>, now: u64) -> Result<Value> {
        let backend = self.backend.as_ref();
        let components = match &inner.objects[id].state {
            State::Ice(i) => i.components.clone(),
            _ => unreachable!(),
        };
        let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(id) else {
            unreachable!()
        };
        let out = i.agent.begin_gathering().map_err(ice_error)?;
        inner.apply_ice(backend, id, token, out, now);
        let host = backend.host_address();
        let reflector_ok = backend.reflector().is_some_and(|r| !denied.contains(&r.ip()));
        let mut sockets = Vec::new();
        for c in &components {
            let port = match &inner.objects[c].state {
                State::Udp(u) => u.port,
                State::Rtp(r) => r.rtp_port,
                _ => continue,
            };
            let srflx = if reflector_ok {
                let mapped = backend.reflexive_address(port);
                if mapped.is_some() {
                    inner.outbound += 1;
                }
                mapped
            } else {
                None
            };
            sockets.push((SocketAddr::new(host, port), srflx));
        }
        let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(id) else {
            unreachable!()
        };
        let out = i.agent.finish_gathering(&sockets).map_err(ice_error)?;
        let candidates = i.agent.local_candidates();
        inner.apply_ice(backend, id, token, out, now);
        Ok(json!({ "candidates": candidates }))
    }

    /// Wires `source_id` to a sink object or to the client (`"client"`).
    pub fn connect_objects(&self, token: &str, source_id: &str, sink: &str) -> Result<Value> {
        let now = self.now_ms();
        if sink == "client" {
            let class = {
                let inner = self.lock();
                inner.token(token, now)?;
                inner.owned(token, source_id)?.class
            };
            self.require(token, ApprovalKind::MediaToClient, &class.as_str().to_ascii_lowercase())?;
        }
        let mut inner = self.lock();
        inner.token(token, now)?;
        let source = inner.owned(token, source_id)?;
        let source_codec = match &source.state {
            State::Source(s) => Some(s.codec.clone()),
            _ => None,
        };
        if !matches!(
            source.class,
            ObjectClass::Microphone | ObjectClass::Camera | ObjectClass::RtpTransport
        ) {
            return Err(AdaptorError::Conflict(format!("{} cannot be a media source", source.class.as_str())));
        }
        let source_class = source.class;
        let sink_ref = if sink == "client" {
            SinkRef::Client
        } else {
            let target = inner.owned(token, sink)?;
            let ok = match (source_class, target.class) {
                (ObjectClass::Microphone, ObjectClass::Speaker | ObjectClass::RtpTransport) => true,
                (ObjectClass::Camera, ObjectClass::Display | ObjectClass::RtpTransport) => true,
                (ObjectClass::RtpTransport, ObjectClass::Speaker | ObjectClass::Display) => true,
                _ => false,
            };
            if !ok {
                return Err(AdaptorError::Conflict(format!(
                    "cannot connect {} to {}",
                    source_class.as_str(),
                    target.class.as_str()
                )));
            }
            if target.class == ObjectClass::RtpTransport {
                let codec = source_codec.as_deref().expect("sources have a codec");
                let pt = self
                    .codecs
                    .by_name(codec)
                    .map(|c| c.payload_type)
                    .ok_or_else(|| AdaptorError::BadRequest(format!("no payload type for {codec}")))?;
                let Some(Object { state: State::Rtp(r), .. }) = inner.objects.get_mut(sink) else {
                    unreachable!()
                };
                match &r.stream {
                    Some(s) if s.payload_type != pt => {
                        return Err(AdaptorError::Conflict(format!("{sink} already carries payload type {}", s.payload_type)))
                    }
                    Some(_) => {}
                    None => r.stream = Some(RtpStream::new(r.ssrc, pt, r.initial_seq, r.timestamp_offset)),
                }
            }
            SinkRef::Object(sink.to_string())
        };
        inner.next_pipeline += 1;
        let pid = format!("pl{}", inner.next_pipeline);
        inner.pipelines.insert(
            pid.clone(),
            Pipeline {
                id: pid.clone(),
                token: token.to_string(),
                source: source_id.to_string(),
                sink: sink_ref,
            },
        );
        Ok(json!({ "pipeline_id": pid }))
    }

    /// Calls [`Adaptor::tick`] every `period` until the adaptor is dropped.
    pub fn spawn_ticker(self: &Arc<Self>, period: std::time::Duration) -> tokio::task::JoinHandle<()> {
        let weak = Arc::downgrade(self);
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(period);
            interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
            loop {
                interval.tick().await;
                let Some(adaptor) = weak.upgrade() else { break };
                adaptor.tick();
            }
        })
    }

    /// Advances timers: token expiry, ICE checks, media frames and RTCP.
    pub fn tick(&self) {
        let now = self.now_ms();
        let backend = self.backend.as_ref();
        let mut inner = self.lock();

        let expired: Vec<String> = inner
            .tokens
            .iter()
            .filter(|(_, t)| t.expires_at.is_some_and(|e| now >= e))
            .map(|(k, _)| k.clone())
            .collect();
        for token in expired {
            let scope: Vec<String> = inner.tokens[&token].scope.iter().cloned().collect();
            for id in scope {
                if inner.objects.get(&id).is_some_and(|o| o.parent.is_none()) {
                    inner.close_recursive(backend, &id);
                }
            }
            inner.pipelines.retain(|_, p| p.token != token);
            if let Some(t) = inner.tokens.remove(&token) {
                let _ = t.events.send("token-expired", "/auth", now, json!({}));
                t.events.close();
            }
        }

        let ice_ids: Vec<(String, String)> = inner
            .objects
            .values()
            .filter(|o| matches!(o.state, State::Ice(_)))
            .map(|o| (o.id.clone(), o.token.clone()))
            .collect();
        for (id, token) in ice_ids {
            let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(&id) else {
                continue;
            };
            let out = i.agent.poll(now);
            inner.apply_ice(backend, &id, &token, out, now);
        }

        let sources: Vec<String> = inner
            .objects
            .values()
            .filter(|o| matches!(&o.state, State::Source(s) if s.running))
            .map(|o| o.id.clone())
            .collect();
        for id in sources {
            let has_pipeline = inner.pipelines.values().any(|p| p.source == id);
            let Some(Object { state: State::Source(s), .. }) = inner.objects.get_mut(&id) else {
                continue;
            };
            let due = s.clock.take_due(now);
            if !has_pipeline {
                continue;
            }
            let skip = due.saturating_sub(self.config.max_catchup_frames);
            for _ in 0..skip {
                s.next_frame();
            }
            let frames: Vec<MediaFrame> = (skip..due).map(|_| s.next_frame()).collect();
            for frame in frames {
                inner.deliver_frame(backend, &id, &frame, now);
            }
        }

        let rtp_ids: Vec<(String, String)> = inner
            .objects
            .values()
            .filter(|o| matches!(&o.state, State::Rtp(r) if r.stream.is_some() && r.remote.is_some() && now >= r.next_rtcp))
            .map(|o| (o.id.clone(), o.token.clone()))
            .collect();
        for (id, token) in rtp_ids {
            let Some(Object { state: State::Rtp(r), .. }) = inner.objects.get_mut(&id) else {
                continue;
            };
            let stream = r.stream.as_ref().expect("filtered");
            let sr = SenderReport::new(r.ssrc, now, stream.last_timestamp(), stream.packets_sent(), stream.octets_sent());
            let remote = r.remote.expect("filtered");
            let to = SocketAddr::new(remote.ip(), remote.port().wrapping_add(1));
            let port = r.rtcp_port;
            r.next_rtcp = now + self.config.rtcp_interval_ms;
            r.reports_sent += 1;
            inner.transmit(backend, &token, port, to, &sr.serialize());
        }
    }
}

fn ice_error(e: crate::ice::IceError) -> AdaptorError {
    match e {
        crate::ice::IceError::NoRemoteCandidates => AdaptorError::BadRequest(e.to_string()),
        other => wrong_state(other),
    }
}

impl DatagramSink for Adaptor {
    fn on_datagram(&self, local_port: u16, from: SocketAddr, data: &[u8]) {
        let now = self.now_ms();
        let backend = self.backend.as_ref();
        let mut inner = self.lock();
        let Some(udp_id) = inner.ports.get(&local_port).cloned() else {
            return;
        };
        let (token, parent) = {
            let Some(obj) = inner.objects.get_mut(&udp_id) else {
                return;
            };
            if let State::Udp(u) = &mut obj.state {
                u.bytes_in += data.len() as u64;
                u.packets_in += 1;
            }
            (obj.token.clone(), obj.parent.clone())
        };

        if let Some(msg) = CheckMessage::decode(data) {
            if let Some(ice_id) = inner.ice_for_socket(&udp_id) {
                let Some(Object { state: State::Ice(i), .. }) = inner.objects.get_mut(&ice_id) else {
                    return;
                };
                let out = i.agent.on_message(local_port, from, &msg, now);
                inner.apply_ice(backend, &ice_id, &token, out, now);
                return;
            }
        }

        let parent_state = parent.as_ref().and_then(|p| inner.objects.get(p)).map(|o| match &o.state {
            State::Rtp(r) => Some(r.rtp == udp_id),
            _ => None,
        });
        match (parent, parent_state) {
            (Some(rtp_id), Some(Some(is_rtp_leg))) => {
                if SenderReport::is_rtcp(data) {
                    if let Ok(sr) = SenderReport::parse(data) {
                        if let Some(Object { state: State::Rtp(r), .. }) = inner.objects.get_mut(&rtp_id) {
                            r.last_report = Some(sr);
                        }
                    }
                    return;
                }
                if !is_rtp_leg {
                    return;
                }
                let Ok(packet) = RtpPacket::parse(data) else {
                    return;
                };
                if let Some(Object { state: State::Rtp(r), .. }) = inner.objects.get_mut(&rtp_id) {
                    r.packets_in += 1;
                    r.bytes_in += packet.payload.len() as u64;
                }
                inner.deliver_rtp(&rtp_id, &packet, now);
            }
            (Some(ice_id), Some(None)) => {
                let payload = json!({ "from": from, "data": B64.encode(data) });
                inner.emit(&token, "ice-recv", &ice_id, now, payload);
            }
            _ => {
                if let Some(Object { state: State::Udp(u), .. }) = inner.objects.get_mut(&udp_id) {
                    if u.inbox.len() >= INBOX_LIMIT {
                        u.inbox.pop_front();
                    }
                    u.inbox.push_back((from, data.to_vec()));
                }
                let payload = json!({ "from": from, "data": B64.encode(data) });
                inner.emit(&token, "udp-recv", &udp_id, now, payload);
            }
        }
    }
}
