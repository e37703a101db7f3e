//! Single-threaded reference model of the signaling registry, used to check
//! the server against randomized operation sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::sync::Arc;

use proptest::prelude::*;
use serde_json::{json, Value};
use webvoice_core::{Clock, EventReceiver, MockClock, SessionDescriptor, TransportCandidate};
use webvoice_signaling::auth::Credentials;
use webvoice_signaling::{RegisterRequest, SequentialIds, SignalError, SignalingServer};

const USERS: u8 = 3;
const GRACE_MS: u64 = 30_000;
const START_MS: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub enum Target {
    Roster,
    Login(u8),
    Call(u8),
}

#[derive(Debug, Clone)]
pub enum Op {
    Register { user: u8, owner: u8, port: u16, expiry: Option<u64> },
    Update { user: u8, owner: u8, pick: u8, port: u16 },
    Unregister { user: u8, owner: u8, pick: u8 },
    Subscribe { user: u8, target: Target },
    Unsubscribe { pick: u8 },
    CreateCall { user: u8 },
    Join { user: u8, call: u8, valid: bool },
    Leave { user: u8, call: u8, pick: u8 },
    Invite { user: u8, to: u8, call: u8, cancel: bool },
    Chat { user: u8, call: u8 },
    GetLogin { user: u8 },
    ListLogins { offset: u8, limit: u8 },
    GetCall { call: u8 },
    Advance { ms: u64 },
    Reap,
}

/// `USERS` stands for an unauthenticated caller.
fn user() -> impl Strategy<Value = u8> {
    prop_oneof![9 => 0..USERS, 1 => Just(USERS)]
}

fn owner() -> impl Strategy<Value = u8> {
    0..USERS
}

fn port() -> impl Strategy<Value = u16> {
    prop_oneof![9 => 1025u16..1100, 1 => Just(80u16)]
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (user(), owner(), port(), prop_oneof![Just(None), Just(Some(30u64)), Just(Some(90)), Just(Some(200_000))])
            .prop_map(|(user, owner, port, expiry)| Op::Register { user, owner, port, expiry }),
        2 => (user(), owner(), any::<u8>(), port())
            .prop_map(|(user, owner, pick, port)| Op::Update { user, owner, pick, port }),
        2 => (user(), owner(), any::<u8>())
            .prop_map(|(user, owner, pick)| Op::Unregister { user, owner, pick }),
        4 => (user(), prop_oneof![
                Just(Target::Roster),
                owner().prop_map(Target::Login),
                any::<u8>().prop_map(Target::Call),
            ])
            .prop_map(|(user, target)| Op::Subscribe { user, target }),
        1 => any::<u8>().prop_map(|pick| Op::Unsubscribe { pick }),
        2 => user().prop_map(|user| Op::CreateCall { user }),
        3 => (user(), any::<u8>(), prop::bool::weighted(0.9))
            .prop_map(|(user, call, valid)| Op::Join { user, call, valid }),
        2 => (user(), any::<u8>(), any::<u8>())
            .prop_map(|(user, call, pick)| Op::Leave { user, call, pick }),
        3 => (user(), owner(), any::<u8>(), any::<bool>())
            .prop_map(|(user, to, call, cancel)| Op::Invite { user, to, call, cancel }),
        1 => (user(), any::<u8>()).prop_map(|(user, call)| Op::Chat { user, call }),
        1 => owner().prop_map(|user| Op::GetLogin { user }),
        1 => (0u8..5, prop_oneof![0u8..4, Just(101u8)])
            .prop_map(|(offset, limit)| Op::ListLogins { offset, limit }),
        1 => any::<u8>().prop_map(|call| Op::GetCall { call }),
        2 => prop_oneof![Just(1_000u64), Just(31_000), Just(61_000), Just(3_600_000)]
            .prop_map(|ms| Op::Advance { ms }),
        1 => Just(Op::Reap),
    ]
}

pub fn ops(max: usize) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(op(), 1..max)
}

fn aor(u: u8) -> String {
    format!("user{u}@example.net")
}

fn caller(u: u8) -> Option<String> {
    (u < USERS).then(|| aor(u))
}

fn candidate(port: u16) -> TransportCandidate {
    TransportCandidate::udp(SocketAddr::from(([192, 0, 2, 10], port)), 100)
}

fn session(valid: bool) -> SessionDescriptor {
    let mut s = SessionDescriptor::new(vec![candidate(40_000)], &["pcm16", "tone"]);
    if !valid {
        s.codecs_preferred = vec!["missing".into()];
    }
    s
}

#[derive(Debug, Clone)]
struct RContact {
    cid: String,
    port: u16,
    expires_secs: u64,
}

#[derive(Debug)]
struct RCall {
    id: String,
    creator: String,
    invited: BTreeSet<String>,
    parts: Vec<(String, String)>,
    next_pid: u64,
    empty_since: Option<u64>,
    reaped: bool,
}

struct Expect {
    kind: &'static str,
    resource: String,
    fields: Vec<(&'static str, Value)>,
}

struct RSub {
    path: String,
    rx: EventReceiver,
    received: u64,
    expected: Vec<Expect>,
}

/// Replays `ops` against a fresh server and the reference model side by side.
pub fn check_sequence(ops: &[Op]) -> Result<(), String> {
    Harness::new().run(ops)
}

struct Harness {
    clock: Arc<MockClock>,
    server: SignalingServer,
    contacts: BTreeMap<String, Vec<RContact>>,
    next_cid: BTreeMap<String, u64>,
    calls: Vec<RCall>,
    next_call: u64,
    subs: Vec<RSub>,
}

fn status(r: &Result<impl Sized, SignalError>) -> u16 {
    match r {
        Ok(_) => 200,
        Err(e) => e.status().as_u16(),
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

impl Harness {
    fn new() -> Self {
        let clock = MockClock::new(START_MS);
        let server = SignalingServer::builder()
            .clock(clock.clone())
            .ids(SequentialIds::default())
            .credentials(Credentials::shared("pw"))
            .build()
            .expect("in-memory server");
        Self {
            clock,
            server,
            contacts: BTreeMap::new(),
            next_cid: BTreeMap::new(),
            calls: Vec::new(),
            next_call: 100,
            subs: Vec::new(),
        }
    }

    fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    fn live(&self, aor: &str) -> Vec<&RContact> {
        let now = self.now();
        let mut v: Vec<&RContact> = self
            .contacts
            .get(aor)
            .map(|cs| cs.iter().filter(|c| now < c.expires_secs * 1000).collect())
            .unwrap_or_default();
        v.sort_by(|a, b| a.cid.cmp(&b.cid));
        v
    }

    fn call_live(&self, idx: Option<usize>) -> Option<usize> {
        let now = self.now();
        idx.filter(|&i| {
            let c = &self.calls[i];
            !c.reaped && !matches!(c.empty_since, Some(t) if now >= t + GRACE_MS)
        })
    }

    /// Maps a random pick onto an existing call, or `None` for a bogus id.
    fn pick_call(&self, pick: u8) -> (Option<usize>, String) {
        let n = self.calls.len();
        let i = pick as usize % (n + 1);
        if i == n {
            (None, "c999".into())
        } else {
            (Some(i), self.calls[i].id.clone())
        }
    }

    fn pick_contact(&self, owner: &str, pick: u8) -> String {
        let all = self.contacts.get(owner).cloned().unwrap_or_default();
        let i = pick as usize % (all.len() + 1);
        all.get(i).map(|c| c.cid.clone()).unwrap_or_else(|| "c999".into())
    }

    fn deliver(&mut self, paths: &[String], exp: impl Fn() -> Expect) -> usize {
        let mut n = 0;
        for s in self.subs.iter_mut().filter(|s| paths.contains(&s.path)) {
            s.expected.push(exp());
            n += 1;
        }
        n
    }

    fn contact_event(&mut self, aor: &str, action: &'static str, cid: &str, online: bool) {
        let resource = format!("/login/{aor}");
        let cid = cid.to_string();
        let paths = [resource.clone(), "/login".to_string()];
        self.deliver(&paths, || Expect {
            kind: "contact-update",
            resource: resource.clone(),
            fields: vec![
                ("action", json!(action)),
                ("aor", json!(aor)),
                ("contact_id", json!(cid)),
                ("online", json!(online)),
            ],
        });
    }

    fn membership_event(&mut self, idx: usize, action: &'static str, pid: &str, who: &str) {
        let call = &self.calls[idx];
        let resource = format!("/call/{}", call.id);
        let count = call.parts.len();
        let (pid, who) = (pid.to_string(), who.to_string());
        self.deliver(&[resource.clone()], || Expect {
            kind: "membership-change",
            resource: resource.clone(),
            fields: vec![
                ("action", json!(action)),
                ("participant_id", json!(pid)),
                ("aor", json!(who)),
                ("participants", json!(count)),
            ],
        });
    }

    fn verify_events(&mut self, step: usize) -> Result<(), String> {
        for (i, sub) in self.subs.iter_mut().enumerate() {
            let got = sub.rx.drain();
            ensure!(
                got.len() == sub.expected.len(),
                "step {step}: subscription {i} on {} got {} events, expected {}",
                sub.path,
                got.len(),
                sub.expected.len()
            );
            for (frame, exp) in got.iter().zip(sub.expected.drain(..)) {
                sub.received += 1;
                ensure!(
                    frame.seq == sub.received,
                    "step {step}: seq {} where {} expected",
                    frame.seq,
                    sub.received
                );
                ensure!(
                    frame.kind == exp.kind && frame.resource == exp.resource,
                    "step {step}: got {} on {}, expected {} on {}",
                    frame.kind,
                    frame.resource,
                    exp.kind,
                    exp.resource
                );
                for (field, want) in exp.fields {
                    let have = if field == "participants" {
                        json!(frame.payload[field].as_array().map(Vec::len))
                    } else {
                        frame.payload[field].clone()
                    };
                    ensure!(
                        have == want,
                        "step {step}: {} field {field} = {have}, expected {want}",
                        exp.kind
                    );
                }
            }
        }
        Ok(())
    }

    fn run(mut self, ops: &[Op]) -> Result<(), String> {
        for (step, op) in ops.iter().enumerate() {
            self.apply(step, op)?;
            self.verify_events(step)?;
        }
        Ok(())
    }

    fn expect_status(step: usize, op: &Op, got: u16, want: u16) -> Result<(), String> {
        ensure!(got == want, "step {step}: {op:?} returned {got}, model says {want}");
        Ok(())
    }

    fn apply(&mut self, step: usize, op: &Op) -> Result<(), String> {
        let now = self.now();
        match op.clone() {
            Op::Register { user, owner, port, expiry } => {
                let who = caller(user);
                let owner = aor(owner);
                let req = RegisterRequest {
                    candidates: vec![candidate(port)],
                    presence: Default::default(),
                    expires_seconds: expiry,
                };
                let res = self.server.register_contact(who.as_deref(), &owner, req);
                let want = match &who {
                    None => 401,
                    Some(w) if *w != owner => 403,
                    _ if port < 1025 => 400,
                    _ => 200,
                };
                Self::expect_status(step, op, status(&res), want)?;
                if want == 200 {
                    let n = self.next_cid.entry(owner.clone()).or_insert(1);
                    let cid = format!("c{n}");
                    *n += 1;
                    let secs = expiry.unwrap_or(3600).clamp(60, 86_400);
                    let reg = res.unwrap();
                    ensure!(reg.contact_id == cid, "step {step}: contact id {} vs {cid}", reg.contact_id);
                    ensure!(
                        reg.contact_path == format!("/login/{owner}/{cid}"),
                        "step {step}: contact path {}",
                        reg.contact_path
                    );
                    self.contacts.entry(owner.clone()).or_default().push(RContact {
                        cid: cid.clone(),
                        port,
                        expires_secs: now / 1000 + secs,
                    });
                    self.contact_event(&owner, "registered", &cid, true);
                }
            }
            Op::Update { user, owner, pick, port } => {
                let who = caller(user);
                let owner = aor(owner);
                let cid = self.pick_contact(&owner, pick);
                let req = RegisterRequest {
                    candidates: vec![candidate(port)],
                    ..Default::default()
                };
                let is_live = self.live(&owner).iter().any(|c| c.cid == cid);
                let want = match &who {
                    None => 401,
                    Some(w) if *w != owner => 403,
                    _ if port < 1025 => 400,
                    _ if !is_live => 404,
                    _ => 200,
                };
                let res = self.server.update_contact(who.as_deref(), &owner, &cid, req.clone());
                Self::expect_status(step, op, status(&res), want)?;
                if want == 200 {
                    let expires_secs = now / 1000 + 3600;
                    let rec = self
                        .contacts
                        .get_mut(&owner)
                        .and_then(|cs| cs.iter_mut().find(|c| c.cid == cid))
                        .expect("live contact");
                    let changed = rec.port != port || rec.expires_secs != expires_secs;
                    rec.port = port;
                    rec.expires_secs = expires_secs;
                    if changed {
                        self.contact_event(&owner, "updated", &cid, true);
                    }
                    self.verify_events(step)?;
                    let before = self.server.snapshot();
                    let again = self.server.update_contact(who.as_deref(), &owner, &cid, req);
                    ensure!(again.is_ok(), "step {step}: repeated PUT failed");
                    ensure!(self.server.snapshot() == before, "step {step}: repeated PUT changed state");
                }
            }
            Op::Unregister { user, owner, pick } => {
                let who = caller(user);
                let owner = aor(owner);
                let cid = self.pick_contact(&owner, pick);
                let is_live = self.live(&owner).iter().any(|c| c.cid == cid);
                let want = match &who {
                    None => 401,
                    Some(w) if *w != owner => 403,
                    _ if !is_live => 404,
                    _ => 200,
                };
                let res = self.server.unregister_contact(who.as_deref(), &owner, &cid);
                Self::expect_status(step, op, status(&res), want)?;
                if want == 200 {
                    self.contacts.get_mut(&owner).unwrap().retain(|c| c.cid != cid);
                    let online = !self.live(&owner).is_empty();
                    self.contact_event(&owner, "unregistered", &cid, online);
                    self.verify_events(step)?;
                    let before = self.server.snapshot();
                    let again = self.server.unregister_contact(who.as_deref(), &owner, &cid);
                    Self::expect_status(step, op, status(&again), 404)?;
                    ensure!(self.server.snapshot() == before, "step {step}: repeated DELETE changed state");
                }
            }
            Op::Subscribe { user, target } => {
                let who = caller(user);
                let (path, want) = match target {
                    Target::Roster => ("/login".to_string(), 200),
                    Target::Login(o) => {
                        let o = aor(o);
                        let want = if who.as_deref() == Some(o.as_str()) { 200 } else { 403 };
                        (format!("/login/{o}"), want)
                    }
                    Target::Call(pick) => {
                        let (idx, id) = self.pick_call(pick);
                        let want = match self.call_live(idx) {
                            None => 404,
                            Some(i) => {
                                let c = &self.calls[i];
                                let w = who.clone().unwrap_or_default();
                                if c.creator == w
                                    || c.invited.contains(&w)
                                    || c.parts.iter().any(|(_, a)| *a == w)
                                {
                                    200
                                } else {
                                    403
                                }
                            }
                        };
                        (format!("/call/{id}"), want)
                    }
                };
                let want = if who.is_none() { 401 } else { want };
                let res = self.server.subscribe(who.as_deref(), &path);
                Self::expect_status(step, op, status(&res), want)?;
                if let Ok((_, rx)) = res {
                    self.subs.push(RSub {
                        path,
                        rx,
                        received: 0,
                        expected: Vec::new(),
                    });
                }
            }
            Op::Unsubscribe { pick } => {
                if !self.subs.is_empty() {
                    let i = pick as usize % self.subs.len();
                    self.subs.remove(i);
                }
            }
            Op::CreateCall { user } => {
                let who = caller(user);
                let res = self.server.create_call(who.as_deref());
                let want = if who.is_some() { 200 } else { 401 };
                Self::expect_status(step, op, status(&res), want)?;
                if let Ok(id) = res {
                    let expected = format!("c{}", self.next_call);
                    ensure!(id == expected, "step {step}: call id {id} vs {expected}");
                    self.next_call += 1;
                    self.calls.push(RCall {
                        id,
                        creator: who.unwrap(),
                        invited: BTreeSet::new(),
                        parts: Vec::new(),
                        next_pid: 1,
                        empty_since: Some(now),
                        reaped: false,
                    });
                }
            }
            Op::Join { user, call, valid } => {
                let who = caller(user);
                let (idx, id) = self.pick_call(call);
                let live = self.call_live(idx);
                let want = match (&who, live) {
                    (None, _) => 401,
                    (_, None) => 404,
                    _ if !valid => 400,
                    _ => 200,
                };
                let res = self.server.join_call(who.as_deref(), &id, session(valid));
                Self::expect_status(step, op, status(&res), want)?;
                if let (Ok(entry), Some(i)) = (res, live) {
                    let w = who.unwrap();
                    let c = &mut self.calls[i];
                    let pid = format!("p{}", c.next_pid);
                    c.next_pid += 1;
                    ensure!(entry.participant_id == pid, "step {step}: pid {} vs {pid}", entry.participant_id);
                    c.parts.push((pid.clone(), w.clone()));
                    c.empty_since = None;
                    self.membership_event(i, "joined", &pid, &w);
                }
            }
            Op::Leave { user, call, pick } => {
                let who = caller(user);
                let (idx, id) = self.pick_call(call);
                let live = self.call_live(idx);
                let (pid, owner) = match live {
                    Some(i) => {
                        let parts = &self.calls[i].parts;
                        let j = pick as usize % (parts.len() + 1);
                        parts
                            .get(j)
                            .cloned()
                            .map(|(p, a)| (p, Some(a)))
                            .unwrap_or(("p999".into(), None))
                    }
                    None => ("p1".into(), None),
                };
                let want = match (&who, live, &owner) {
                    (None, _, _) => 401,
                    (_, None, _) | (_, _, None) => 404,
                    (Some(w), _, Some(o)) if w != o => 403,
                    _ => 200,
                };
                let res = self.server.leave_call(who.as_deref(), &id, &pid);
                Self::expect_status(step, op, status(&res), want)?;
                if want == 200 {
                    let i = live.unwrap();
                    let c = &mut self.calls[i];
                    c.parts.retain(|(p, _)| *p != pid);
                    if c.parts.is_empty() {
                        c.empty_since = Some(now);
                    }
                    self.membership_event(i, "left", &pid, &owner.unwrap());
                }
            }
            Op::Invite { user, to, call, cancel } => {
                let who = caller(user);
                let to = aor(to);
                let (idx, id) = self.pick_call(call);
                let path = format!("/login/{to}");
                let conference = format!("/call/{id}");
                let payload = if cancel {
                    json!({"type": "cancellation", "conference": conference, "reason": "cancelled"})
                } else {
                    json!({"type": "invitation", "conference": conference, "time": now, "return": "/login/x@y"})
                };
                let has_subs = self.subs.iter().any(|s| s.path == path);
                let want = match &who {
                    None => 401,
                    _ if self.live(&to).is_empty() && !has_subs => 404,
                    _ => 200,
                };
                let res = self.server.notify(who.as_deref(), &path, payload);
                Self::expect_status(step, op, status(&res), want)?;
                if want == 200 {
                    if !cancel {
                        if let Some(i) = idx.filter(|&i| !self.calls[i].reaped) {
                            self.calls[i].invited.insert(to.clone());
                        }
                    }
                    let from = who.unwrap();
                    let kind = if cancel { "cancellation" } else { "invitation" };
                    let n = self.deliver(&[path.clone()], || Expect {
                        kind,
                        resource: path.clone(),
                        fields: vec![("from", json!(from)), ("conference", json!(conference))],
                    });
                    let delivered = res.unwrap();
                    ensure!(delivered == n, "step {step}: delivered {delivered}, model {n}");
                }
            }
            Op::Chat { user, call } => {
                let who = caller(user);
                let (idx, id) = self.pick_call(call);
                let live = self.call_live(idx);
                let member = live.is_some_and(|i| {
                    self.calls[i].parts.iter().any(|(_, a)| Some(a) == who.as_ref())
                });
                let want = match (&who, live) {
                    (None, _) => 401,
                    (_, None) => 404,
                    _ if !member => 403,
                    _ => 200,
                };
                let path = format!("/call/{id}");
                let res = self
                    .server
                    .notify(who.as_deref(), &path, json!({"type": "message", "text": "hi"}));
                Self::expect_status(step, op, status(&res), want)?;
                if want == 200 {
                    let from = who.unwrap();
                    let n = self.deliver(&[path.clone()], || Expect {
                        kind: "message",
                        resource: path.clone(),
                        fields: vec![("from", json!(from)), ("text", json!("hi"))],
                    });
                    ensure!(res.unwrap() == n, "step {step}: chat delivery count mismatch");
                }
            }
            Op::GetLogin { user } => {
                let a = aor(user);
                let before = self.server.snapshot();
                let res = self.server.get_login(&a);
                ensure!(self.server.snapshot() == before, "step {step}: GET /login/{a} mutated state");
                let want: Vec<String> = self.live(&a).iter().map(|c| c.cid.clone()).collect();
                match res {
                    Ok(cs) => {
                        let got: Vec<String> = cs.iter().map(|c| c.contact_id.clone()).collect();
                        ensure!(got == want, "step {step}: contacts {got:?} vs {want:?}");
                        let ports: Vec<u16> = cs.iter().map(|c| c.candidates[0].port).collect();
                        let want_ports: Vec<u16> = self.live(&a).iter().map(|c| c.port).collect();
                        ensure!(ports == want_ports, "step {step}: ports {ports:?} vs {want_ports:?}");
                    }
                    Err(e) => ensure!(
                        want.is_empty() && e.status().as_u16() == 404,
                        "step {step}: GET /login/{a} failed with {e} but model has {want:?}"
                    ),
                }
            }
            Op::ListLogins { offset, limit } => {
                let before = self.server.snapshot();
                let res = self.server.list_logins(Some(offset as i64), Some(limit as i64));
                ensure!(self.server.snapshot() == before, "step {step}: GET /login mutated state");
                let online: Vec<String> = self
                    .contacts
                    .keys()
                    .filter(|a| !self.live(a).is_empty())
                    .cloned()
                    .collect();
                if (1..=100).contains(&limit) {
                    let page = res.map_err(|e| format!("step {step}: list failed: {e}"))?;
                    ensure!(page.total == online.len(), "step {step}: total {}", page.total);
                    let want: Vec<String> =
                        online.into_iter().skip(offset as usize).take(limit as usize).collect();
                    ensure!(page.items == want, "step {step}: page {:?} vs {want:?}", page.items);
                } else {
                    Self::expect_status(step, op, status(&res), 400)?;
                }
            }
            Op::GetCall { call } => {
                let (idx, id) = self.pick_call(call);
                let before = self.server.snapshot();
                let res = self.server.get_call(&id);
                ensure!(self.server.snapshot() == before, "step {step}: GET /call/{id} mutated state");
                match self.call_live(idx) {
                    Some(i) => {
                        let conf = res.map_err(|e| format!("step {step}: GET /call/{id}: {e}"))?;
                        let got: Vec<&str> =
                            conf.participants.iter().map(|p| p.participant_id.as_str()).collect();
                        let want: Vec<&str> =
                            self.calls[i].parts.iter().map(|(p, _)| p.as_str()).collect();
                        ensure!(got == want, "step {step}: participants {got:?} vs {want:?}");
                    }
                    None => Self::expect_status(step, op, status(&res), 404)?,
                }
            }
            Op::Advance { ms } => {
                self.clock.advance(ms);
            }
            Op::Reap => {
                let report = self.server.reap();
                let mut expired: Vec<(String, String)> = Vec::new();
                for (a, cs) in &self.contacts {
                    let mut ids: Vec<&RContact> =
                        cs.iter().filter(|c| now >= c.expires_secs * 1000).collect();
                    ids.sort_by(|x, y| x.cid.cmp(&y.cid));
                    expired.extend(ids.into_iter().map(|c| (a.clone(), c.cid.clone())));
                }
                ensure!(
                    report.contacts_expired == expired.len(),
                    "step {step}: reaped {} contacts, model {}",
                    report.contacts_expired,
                    expired.len()
                );
                for (a, cid) in expired {
                    self.contacts.get_mut(&a).unwrap().retain(|c| c.cid != cid);
                    let online = !self.live(&a).is_empty();
                    self.contact_event(&a, "expired", &cid, online);
                }
                let mut collected = 0;
                for i in 0..self.calls.len() {
                    if !self.calls[i].reaped && self.call_live(Some(i)).is_none() {
                        self.calls[i].reaped = true;
                        collected += 1;
                    }
                }
                ensure!(
                    report.conferences_collected == collected,
                    "step {step}: collected {} conferences, model {collected}",
                    report.conferences_collected
                );
            }
        }
        Ok(())
    }
}
