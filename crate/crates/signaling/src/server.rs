use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::{json, Map, Value};
use webvoice_core::{
    validate_candidates, EventChannel, EventReceiver, EventSender, SessionDescriptor,
    SharedClock, SystemClock,
};

use crate::auth::{is_valid_aor, new_token, Credentials};
use crate::config::ServerConfig;
use crate::error::SignalError;
use crate::ids::{IdGenerator, SequentialIds};
use crate::model::{
    ConferenceResource, ContactRecord, EventKind, LoginPage, ParticipantEntry, RegisterRequest,
    Registered,
};
use crate::store::{MemoryStore, Store, StoreRecord};

type Result<T> = std::result::Result<T, SignalError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
struct Conference {
    resource: ConferenceResource,
    creator: String,
    invited: BTreeSet<String>,
    /// Set while the conference has no participants.
    empty_since: Option<u64>,
}

struct Subscription {
    id: String,
    aor: String,
    tx: EventSender,
}

struct Inner {
    ids: Box<dyn IdGenerator>,
    tokens: HashMap<String, String>,
    contacts: BTreeMap<String, BTreeMap<String, ContactRecord>>,
    conferences: BTreeMap<String, Conference>,
    subscriptions: BTreeMap<String, Vec<Subscription>>,
    next_sub: u64,
}

/// Everything observable about server state, for purity and idempotence checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    contacts: BTreeMap<String, BTreeMap<String, ContactRecord>>,
    conferences: BTreeMap<String, Value>,
    subscriptions: BTreeMap<String, Vec<String>>,
    tokens: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReapReport {
    pub contacts_expired: usize,
    pub conferences_collected: usize,
}

pub struct SignalingServer {
    inner: Mutex<Inner>,
    clock: SharedClock,
    config: ServerConfig,
    credentials: Credentials,
    store: Arc<dyn Store>,
}

pub struct Builder {
    clock: SharedClock,
    config: ServerConfig,
    credentials: Credentials,
    store: Arc<dyn Store>,
    ids: Box<dyn IdGenerator>,
}

impl Builder {
    pub fn clock(mut self, clock: SharedClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(mut self, config: ServerConfig) -> Self {
        self.config = config;
        self
    }

    pub fn credentials(mut self, credentials: Credentials) -> Self {
        self.credentials = credentials;
        self
    }

    pub fn store(mut self, store: Arc<dyn Store>) -> Self {
        self.store = store;
        self
    }

    pub fn ids(mut self, ids: impl IdGenerator + 'static) -> Self {
        self.ids = Box::new(ids);
        self
    }

    /// Replays the store and returns the server.
    pub fn build(self) -> std::io::Result<SignalingServer> {
        let mut inner = Inner {
            ids: self.ids,
            tokens: HashMap::new(),
            contacts: BTreeMap::new(),
            conferences: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            next_sub: 1,
        };
        for record in self.store.load()? {
            match record {
                StoreRecord::Upsert { contact } => {
                    inner.ids.observe_contact_id(&contact.aor, &contact.contact_id);
                    inner
                        .contacts
                        .entry(contact.aor.clone())
                        .or_default()
                        .insert(contact.contact_id.clone(), contact);
                }
                StoreRecord::Remove { aor, contact_id } => {
                    inner.ids.observe_contact_id(&aor, &contact_id);
                    if let Some(set) = inner.contacts.get_mut(&aor) {
                        set.remove(&contact_id);
                        if set.is_empty() {
                            inner.contacts.remove(&aor);
                        }
                    }
                }
            }
        }
        Ok(SignalingServer {
            inner: Mutex::new(inner),
            clock: self.clock,
            config: self.config,
            credentials: self.credentials,
            store: self.store,
        })
    }
}

enum Target {
    Logins,
    Login(String),
    Call(String),
}

fn parse_target(path: &str) -> Option<Target> {
    let rest = path.strip_prefix('/')?;
    let mut parts = rest.split('/');
    let head = parts.next()?;
    let id = parts.next();
    if parts.next().is_some() {
        return None;
    }
    match (head, id) {
        ("login", None) => Some(Target::Logins),
        ("login", Some(aor)) if !aor.is_empty() => Some(Target::Login(aor.to_string())),
        ("call", Some(id)) if !id.is_empty() => Some(Target::Call(id.to_string())),
        _ => None,
    }
}

/// Extracts the call id from a conference reference, accepting either a
/// path (`/call/c123`) or an absolute URL ending in one.
fn conference_id(reference: &str) -> Option<String> {
    let idx = reference.rfind("/call/")?;
    let id = &reference[idx + "/call/".len()..];
    (!id.is_empty() && !id.contains('/')).then(|| id.to_string())
}

fn require(caller: Option<&str>) -> Result<&str> {
    caller.ok_or(SignalError::Unauthorized)
}

impl Inner {
    fn live_contacts(&self, aor: &str, now: u64) -> Vec<&ContactRecord> {
        self.contacts
            .get(aor)
            .map(|set| set.values().filter(|c| c.is_live(now)).collect())
            .unwrap_or_default()
    }

    fn live_conference(&self, call_id: &str, now: u64, grace: u64) -> Option<&Conference> {
        self.conferences
            .get(call_id)
            .filter(|c| !matches!(c.empty_since, Some(t) if now >= t + grace))
    }

    /// Fans an event out to every subscription on `path` and returns the
    /// number of deliveries. Dead subscriptions are pruned on the way.
    fn publish(&mut self, path: &str, kind: EventKind, payload: &Value, now: u64) -> usize {
        let mut delivered = 0;
        let mut targets = vec![path.to_string()];
        if path.starts_with("/login/") && kind == EventKind::ContactUpdate {
            targets.push("/login".to_string());
        }
        for target in targets {
            if let Some(subs) = self.subscriptions.get_mut(&target) {
                subs.retain(|s| match s.tx.send(kind.as_str(), path, now, payload.clone()) {
                    Ok(_) => {
                        delivered += 1;
                        true
                    }
                    Err(_) => false,
                });
                if subs.is_empty() {
                    self.subscriptions.remove(&target);
                }
            }
        }
        delivered
    }

    fn close_subscriptions(&mut self, path: &str) {
        if let Some(subs) = self.subscriptions.remove(path) {
            for s in subs {
                s.tx.close();
            }
        }
    }

    fn has_subscribers(&self, path: &str) -> bool {
        self.subscriptions
            .get(path)
            .is_some_and(|subs| subs.iter().any(|s| !s.tx.is_closed()))
    }
}

fn membership_payload(conf: &Conference, action: &str, entry: &ParticipantEntry) -> Value {
    json!({
        "action": action,
        "participant_id": entry.participant_id,
        "aor": entry.aor,
        "participants": conf.resource.participants,
    })
}

fn contact_payload(action: &str, record: &ContactRecord, online: bool) -> Value {
    json!({
        "action": action,
        "aor": record.aor,
        "contact_id": record.contact_id,
        "contact": record,
        "online": online,
    })
}

impl SignalingServer {
    pub fn builder() -> Builder {
        Builder {
            clock: Arc::new(SystemClock),
            config: ServerConfig::default(),
            credentials: Credentials::default(),
            store: Arc::new(MemoryStore::new()),
            ids: Box::new(SequentialIds::default()),
        }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn authenticate(&self, aor: &str, secret: &str) -> Result<String> {
        if !is_valid_aor(aor) {
            return Err(SignalError::BadRequest(format!("malformed address {aor:?}")));
        }
        if !self.credentials.check(aor, secret) {
            return Err(SignalError::Unauthorized);
        }
        let token = new_token();
        self.inner
            .lock()
            .unwrap()
            .tokens
            .insert(token.clone(), aor.to_string());
        Ok(token)
    }

    /// Resolves a bearer token to the aor it was issued for.
    pub fn identify(&self, token: &str) -> Option<String> {
        self.inner.lock().unwrap().tokens.get(token).cloned()
    }

    pub fn register_contact(
        &self,
        caller: Option<&str>,
        aor: &str,
        req: RegisterRequest,
    ) -> Result<Registered> {
        let caller = require(caller)?;
        if caller != aor {
            return Err(SignalError::Forbidden(format!("cannot register for {aor}")));
        }
        validate_candidates(&req.candidates).map_err(|e| SignalError::BadRequest(e.to_string()))?;
        let now = self.clock.now_ms();
        let expires_at = now / 1000 + self.config.clamp_expiry(req.expires_seconds);
        let mut inner = self.inner.lock().unwrap();
        let contact_id = inner.ids.contact_id(aor);
        let record = ContactRecord {
            aor: aor.to_string(),
            contact_id: contact_id.clone(),
            candidates: req.candidates,
            expires_at,
            presence: req.presence,
        };
        self.store
            .append(&StoreRecord::Upsert {
                contact: record.clone(),
            })
            .map_err(|e| SignalError::Storage(e.to_string()))?;
        let path = record.path();
        inner
            .contacts
            .entry(aor.to_string())
            .or_default()
            .insert(contact_id.clone(), record.clone());
        inner.publish(
            &format!("/login/{aor}"),
            EventKind::ContactUpdate,
            &contact_payload("registered", &record, true),
            now,
        );
        Ok(Registered {
            contact_id,
            contact_path: path,
            expires_at,
        })
    }

    pub fn update_contact(
        &self,
        caller: Option<&str>,
        aor: &str,
        contact_id: &str,
        req: RegisterRequest,
    ) -> Result<ContactRecord> {
        let caller = require(caller)?;
        if caller != aor {
            return Err(SignalError::Forbidden(format!("cannot update contacts of {aor}")));
        }
        validate_candidates(&req.candidates).map_err(|e| SignalError::BadRequest(e.to_string()))?;
        let now = self.clock.now_ms();
        let mut inner = self.inner.lock().unwrap();
        let current = inner
            .contacts
            .get(aor)
            .and_then(|set| set.get(contact_id))
            .filter(|c| c.is_live(now))
            .cloned()
            .ok_or_else(|| SignalError::NotFound(format!("/login/{aor}/{contact_id}")))?;
        let updated = ContactRecord {
            candidates: req.candidates,
            presence: req.presence,
            expires_at: now / 1000 + self.config.clamp_expiry(req.expires_seconds),
            ..current.clone()
        };
        if updated != current {
            self.store
                .append(&StoreRecord::Upsert {
                    contact: updated.clone(),
                })
                .map_err(|e| SignalError::Storage(e.to_string()))?;
            inner
                .contacts
                .get_mut(aor)
                .expect("contact set exists")
                .insert(contact_id.to_string(), updated.clone());
            inner.publish(
                &format!("/login/{aor}"),
                EventKind::ContactUpdate,
                &contact_payload("updated", &updated, true),
                now,
            );
        }
        Ok(updated)
    }

    pub fn unregister_contact(&self, caller: Option<&str>, aor: &str, contact_id: &str) -> Result<()> {
        let caller = require(caller)?;
        if caller != aor {
            return Err(SignalError::Forbidden(format!("cannot unregister contacts of {aor}")));
        }
        let now = self.clock.now_ms();
        let mut inner = self.inner.lock().unwrap();
        let live = inner
            .contacts
            .get(aor)
            .and_then(|set| set.get(contact_id))
            .is_some_and(|c| c.is_live(now));
        if !live {
            return Err(SignalError::NotFound(format!("/login/{aor}/{contact_id}")));
        }
        let removed = inner
            .contacts
            .get_mut(aor)
            .and_then(|set| set.remove(contact_id))
            .expect("checked above");
        if inner.contacts.get(aor).is_some_and(BTreeMap::is_empty) {
            inner.contacts.remove(aor);
        }
        self.store
            .append(&StoreRecord::Remove {
                aor: aor.to_string(),
                contact_id: contact_id.to_string(),
            })
            .map_err(|e| SignalError::Storage(e.to_string()))?;
        let online = !inner.live_contacts(aor, now).is_empty();
        inner.publish(
            &format!("/login/{aor}"),
            EventKind::ContactUpdate,
            &contact_payload("unregistered", &removed, online),
            now,
        );
        Ok(())
    }

    fn page_bounds(&self, offset: Option<i64>, limit: Option<i64>) -> Result<(usize, usize)> {
        let offset = offset.unwrap_or(0);
        let limit = limit.unwrap_or(self.config.default_limit as i64);
        if offset < 0 {
            return Err(SignalError::BadRequest("offset must not be negative".into()));
        }
        if limit < 1 || limit > self.config.max_limit as i64 {
            return Err(SignalError::BadRequest(format!(
                "limit must be within 1..={}",
                self.config.max_limit
            )));
        }
        Ok((offset as usize, limit as usize))
    }

    /// Online users, sorted by aor, one page at a time.
    pub fn list_logins(&self, offset: Option<i64>, limit: Option<i64>) -> Result<LoginPage> {
        let (offset, limit) = self.page_bounds(offset, limit)?;
        let now = self.clock.now_ms();
        let inner = self.inner.lock().unwrap();
        let online: Vec<&String> = inner
            .contacts
            .iter()
            .filter(|(_, set)| set.values().any(|c| c.is_live(now)))
            .map(|(aor, _)| aor)
            .collect();
        Ok(LoginPage {
            total: online.len(),
            items: online.into_iter().skip(offset).take(limit).cloned().collect(),
        })
    }

    /// Live contacts of `aor`; `NotFound` means the user is offline.
    pub fn get_login(&self, aor: &str) -> Result<Vec<ContactRecord>> {
        let now = self.clock.now_ms();
        let inner = self.inner.lock().unwrap();
        let contacts: Vec<ContactRecord> = inner.live_contacts(aor, now).into_iter().cloned().collect();
        if contacts.is_empty() {
            return Err(SignalError::NotFound(format!("{aor} is offline")));
        }
        Ok(contacts)
    }

    pub fn get_contact(&self, aor: &str, contact_id: &str) -> Result<ContactRecord> {
        let now = self.clock.now_ms();
        let inner = self.inner.lock().unwrap();
        inner
            .contacts
            .get(aor)
            .and_then(|set| set.get(contact_id))
            .filter(|c| c.is_live(now))
            .cloned()
            .ok_or_else(|| SignalError::NotFound(format!("/login/{aor}/{contact_id}")))
    }

    pub fn create_call(&self, caller: Option<&str>) -> Result<String> {
        let caller = require(caller)?;
        let now = self.clock.now_ms();
        let mut inner = self.inner.lock().unwrap();
        let call_id = inner.ids.call_id();
        inner.conferences.insert(
            call_id.clone(),
            Conference {
                resource: ConferenceResource {
                    call_id: call_id.clone(),
                    participants: Vec::new(),
                    created_at: now,
                },
                creator: caller.to_string(),
                invited: BTreeSet::new(),
                empty_since: Some(now),
            },
        );
        Ok(call_id)
    }

    pub fn join_call(
        &self,
        caller: Option<&str>,
        call_id: &str,
        session: SessionDescriptor,
    ) -> Result<ParticipantEntry> {
        let caller = require(caller)?;
        let now = self.clock.now_ms();
        let grace = self.config.grace_ms;
        let mut inner = self.inner.lock().unwrap();
        if inner.live_conference(call_id, now, grace).is_none() {
            return Err(SignalError::NotFound(format!("/call/{call_id}")));
        }
        session
            .validate()
            .map_err(|e| SignalError::BadRequest(e.to_string()))?;
        let participant_id = inner.ids.participant_id(call_id);
        let entry = ParticipantEntry {
            participant_id,
            aor: caller.to_string(),
            session,
            joined_at: now,
        };
        let conf = inner.conferences.get_mut(call_id).expect("checked above");
        conf.resource.participants.push(entry.clone());
        conf.empty_since = None;
        let payload = membership_payload(conf, "joined", &entry);
        inner.publish(&format!("/call/{call_id}"), EventKind::MembershipChange, &payload, now);
        Ok(entry)
    }

    pub fn leave_call(&self, caller: Option<&str>, call_id: &str, participant_id: &str) -> Result<()> {
        let caller = require(caller)?;
        let now = self.clock.now_ms();
        let grace = self.config.grace_ms;
        let mut inner = self.inner.lock().unwrap();
        if inner.live_conference(call_id, now, grace).is_none() {
            return Err(SignalError::NotFound(format!("/call/{call_id}")));
        }
        let conf = inner.conferences.get_mut(call_id).expect("checked above");
        let idx = conf
            .resource
            .participants
            .iter()
            .position(|p| p.participant_id == participant_id)
            .ok_or_else(|| SignalError::NotFound(format!("/call/{call_id}/{participant_id}")))?;
        if conf.resource.participants[idx].aor != caller {
            return Err(SignalError::Forbidden(format!(
                "{participant_id} belongs to another user"
            )));
        }
        let entry = conf.resource.participants.remove(idx);
        if conf.resource.participants.is_empty() {
            conf.empty_since = Some(now);
        }
        let payload = membership_payload(conf, "left", &entry);
        inner.publish(&format!("/call/{call_id}"), EventKind::MembershipChange, &payload, now);
        Ok(())
    }

    pub fn get_call(&self, call_id: &str) -> Result<ConferenceResource> {
        let now = self.clock.now_ms();
        let inner = self.inner.lock().unwrap();
        inner
            .live_conference(call_id, now, self.config.grace_ms)
            .map(|c| c.resource.clone())
            .ok_or_else(|| SignalError::NotFound(format!("/call/{call_id}")))
    }

    pub fn get_participant(&self, call_id: &str, participant_id: &str) -> Result<ParticipantEntry> {
        self.get_call(call_id)?
            .participants
            .into_iter()
            .find(|p| p.participant_id == participant_id)
            .ok_or_else(|| SignalError::NotFound(format!("/call/{call_id}/{participant_id}")))
    }

    pub fn list_calls(&self, offset: Option<i64>, limit: Option<i64>) -> Result<LoginPage> {
        let (offset, limit) = self.page_bounds(offset, limit)?;
        let now = self.clock.now_ms();
        let inner = self.inner.lock().unwrap();
        let live: Vec<String> = inner
            .conferences
            .keys()
            .filter(|id| inner.live_conference(id, now, self.config.grace_ms).is_some())
            .cloned()
            .collect();
        Ok(LoginPage {
            total: live.len(),
            items: live.into_iter().skip(offset).take(limit).collect(),
        })
    }

    /// Opens a subscription on `path`. Allowed targets: `/login` (any
    /// authenticated user), `/login/{aor}` (its owner) and `/call/{id}` (the
    /// creator, participants and invited users).
    pub fn subscribe(&self, caller: Option<&str>, path: &str) -> Result<(String, EventReceiver)> {
        let caller = require(caller)?;
        let now = self.clock.now_ms();
        let mut inner = self.inner.lock().unwrap();
        match parse_target(path).ok_or_else(|| SignalError::NotFound(path.to_string()))? {
            Target::Logins => {}
            Target::Login(aor) => {
                if aor != caller {
                    return Err(SignalError::Forbidden(format!("cannot subscribe to {path}")));
                }
            }
            Target::Call(id) => {
                let conf = inner
                    .live_conference(&id, now, self.config.grace_ms)
                    .ok_or_else(|| SignalError::NotFound(path.to_string()))?;
                let allowed = conf.creator == caller
                    || conf.invited.contains(caller)
                    || conf.resource.participants.iter().any(|p| p.aor == caller);
                if !allowed {
                    return Err(SignalError::Forbidden(format!("not a member of {path}")));
                }
            }
        }
        let sub_id = format!("s{}", inner.next_sub);
        inner.next_sub += 1;
        let (tx, rx) = EventChannel::bounded(self.config.subscriber_queue);
        inner
            .subscriptions
            .entry(path.to_string())
            .or_default()
            .push(Subscription {
                id: sub_id.clone(),
                aor: caller.to_string(),
                tx,
            });
        Ok((sub_id, rx))
    }

    /// Fans an application event out to the live subscriptions on `path`.
    /// Login resources accept invitation and cancellation; conferences accept
    /// message. Returns the number of deliveries, which may be zero.
    pub fn notify(&self, caller: Option<&str>, path: &str, payload: Value) -> Result<usize> {
        let caller = require(caller)?;
        let now = self.clock.now_ms();
        let mut body: Map<String, Value> = match payload {
            Value::Object(m) => m,
            _ => return Err(SignalError::BadRequest("payload must be a JSON object".into())),
        };
        let kind = body
            .get("type")
            .and_then(Value::as_str)
            .and_then(EventKind::parse)
            .ok_or_else(|| SignalError::BadRequest("missing or unknown event type".into()))?;
        body.insert("from".into(), Value::String(caller.to_string()));
        let mut inner = self.inner.lock().unwrap();
        match parse_target(path).ok_or_else(|| SignalError::NotFound(path.to_string()))? {
            Target::Login(aor) => {
                if !matches!(kind, EventKind::Invitation | EventKind::Cancellation) {
                    return Err(SignalError::BadRequest(format!(
                        "{} cannot be sent to a login resource",
                        kind.as_str()
                    )));
                }
                let conference = body
                    .get("conference")
                    .and_then(Value::as_str)
                    .ok_or_else(|| SignalError::BadRequest("payload missing conference URL".into()))?
                    .to_string();
                if kind == EventKind::Invitation {
                    for field in ["time", "return"] {
                        if body.get(field).is_none_or(Value::is_null) {
                            return Err(SignalError::BadRequest(format!(
                                "invitation missing {field}"
                            )));
                        }
                    }
                }
                if inner.live_contacts(&aor, now).is_empty() && !inner.has_subscribers(path) {
                    return Err(SignalError::NotFound(path.to_string()));
                }
                if kind == EventKind::Invitation {
                    if let Some(id) = conference_id(&conference) {
                        if let Some(conf) = inner.conferences.get_mut(&id) {
                            conf.invited.insert(aor.clone());
                        }
                    }
                }
                Ok(inner.publish(path, kind, &Value::Object(body), now))
            }
            Target::Call(id) => {
                let conf = inner
                    .live_conference(&id, now, self.config.grace_ms)
                    .ok_or_else(|| SignalError::NotFound(path.to_string()))?;
                if !conf.resource.participants.iter().any(|p| p.aor == caller) {
                    return Err(SignalError::Forbidden(format!("not a participant of {path}")));
                }
                if kind != EventKind::Message {
                    return Err(SignalError::BadRequest(format!(
                        "{} cannot be sent to a conference",
                        kind.as_str()
                    )));
                }
                Ok(inner.publish(path, kind, &Value::Object(body), now))
            }
            Target::Logins => Err(SignalError::BadRequest("cannot notify the login collection".into())),
        }
    }

    /// Drops expired contacts and conferences whose grace period has run out.
    pub fn reap(&self) -> ReapReport {
        let now = self.clock.now_ms();
        let grace = self.config.grace_ms;
        let mut report = ReapReport::default();
        let mut inner = self.inner.lock().unwrap();

        let expired: Vec<ContactRecord> = inner
            .contacts
            .values()
            .flat_map(|set| set.values())
            .filter(|c| !c.is_live(now))
            .cloned()
            .collect();
        for record in expired {
            if let Some(set) = inner.contacts.get_mut(&record.aor) {
                set.remove(&record.contact_id);
                if set.is_empty() {
                    inner.contacts.remove(&record.aor);
                }
            }
            if let Err(e) = self.store.append(&StoreRecord::Remove {
                aor: record.aor.clone(),
                contact_id: record.contact_id.clone(),
            }) {
                tracing::warn!(error = %e, "failed to persist contact expiry");
            }
            let online = !inner.live_contacts(&record.aor, now).is_empty();
            inner.publish(
                &format!("/login/{}", record.aor),
                EventKind::ContactUpdate,
                &contact_payload("expired", &record, online),
                now,
            );
            report.contacts_expired += 1;
        }

        let dead: Vec<String> = inner
            .conferences
            .iter()
            .filter(|(_, c)| matches!(c.empty_since, Some(t) if now >= t + grace))
            .map(|(id, _)| id.clone())
            .collect();
        for id in dead {
            inner.conferences.remove(&id);
            inner.close_subscriptions(&format!("/call/{id}"));
            report.conferences_collected += 1;
        }

        inner.subscriptions.retain(|_, subs| {
            subs.retain(|s| !s.tx.is_closed());
            !subs.is_empty()
        });
        report
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.inner.lock().unwrap();
        Snapshot {
            contacts: inner.contacts.clone(),
            conferences: inner
                .conferences
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::to_value(v).expect("serializable")))
                .collect(),
            subscriptions: inner
                .subscriptions
                .iter()
                .map(|(k, subs)| {
                    (
                        k.clone(),
                        subs.iter().map(|s| format!("{}:{}", s.id, s.aor)).collect(),
                    )
                })
                .collect(),
            tokens: inner.tokens.len(),
        }
    }
}
