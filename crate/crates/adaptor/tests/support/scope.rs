//! Two applications drive one adaptor with interleaved operations; every
//! response and event either token sees must concern its own objects only.

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use serde_json::{json, Value};
use webvoice_adaptor::{Adaptor, AdaptorError, StaticPolicy};
use webvoice_core::{EventFrame, MockClock};

use super::MemNet;

#[derive(Debug, Clone)]
pub enum Action {
    Create(&'static str),
    Describe(usize),
    Invoke(usize, &'static str),
    SendTo(usize, usize),
    Connect(usize, usize),
    ConnectClient(usize),
    Close(usize),
    List,
    Tick(u64),
}

#[derive(Debug, Clone)]
pub struct ScopeOp {
    pub actor: usize,
    pub action: Action,
}

pub fn action() -> impl Strategy<Value = Action> {
    let class = prop::sample::select(vec!["UdpTransport", "RtpTransport", "Microphone", "Speaker", "IceTransport"]);
    let method = prop::sample::select(vec!["stats", "state", "recv-poll", "start", "stop", "gather", "reset"]);
    prop_oneof![
        3 => class.prop_map(Action::Create),
        2 => any::<usize>().prop_map(Action::Describe),
        2 => (any::<usize>(), method).prop_map(|(i, m)| Action::Invoke(i, m)),
        2 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Action::SendTo(a, b)),
        2 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Action::Connect(a, b)),
        1 => any::<usize>().prop_map(Action::ConnectClient),
        1 => any::<usize>().prop_map(Action::Close),
        1 => Just(Action::List),
        1 => (1u64..200).prop_map(Action::Tick),
    ]
}

pub fn interleaving(max: usize) -> impl Strategy<Value = Vec<ScopeOp>> {
    prop::collection::vec((0usize..2, action()).prop_map(|(actor, action)| ScopeOp { actor, action }), 1..max)
}

/// Outcome of one interleaving.
#[derive(Debug, Default)]
pub struct Observations {
    /// Responses or events that exposed another token's object.
    pub cross: Vec<String>,
    /// Requests against a foreign object that were refused.
    pub refused: usize,
}

fn ids_in(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) if s.starts_with('o') && s[1..].chars().all(|c| c.is_ascii_digit()) && s.len() > 1 => {
            out.push(s.clone())
        }
        Value::String(s) => {
            if let Some(id) = s.strip_prefix("/objects/") {
                out.push(id.to_string());
            }
        }
        Value::Array(a) => a.iter().for_each(|x| ids_in(x, out)),
        Value::Object(m) => m.values().for_each(|x| ids_in(x, out)),
        _ => {}
    }
}

struct Actor {
    token: String,
    owned: BTreeSet<String>,
    events: webvoice_core::EventReceiver,
}

fn check(actor: usize, owned: &BTreeSet<String>, v: &Value, what: &str, obs: &mut Observations) {
    let mut ids = Vec::new();
    ids_in(v, &mut ids);
    for id in ids {
        if !owned.contains(&id) {
            obs.cross.push(format!("token {actor} saw {id} via {what}: {v}"));
        }
    }
}

fn check_events(actor: usize, a: &Actor, obs: &mut Observations) {
    for EventFrame { kind, resource, payload, .. } in a.events.drain() {
        let doc = json!({ "resource": resource, "payload": payload });
        check(actor, &a.owned, &doc, &format!("event {kind}"), obs);
    }
}

/// Runs `ops` against a fresh adaptor shared by two applications.
pub fn run_interleaving(ops: &[ScopeOp]) -> Observations {
    let net = MemNet::default();
    let clock = MockClock::new(0);
    let adaptor: Arc<Adaptor> = super::adaptor(&net, "10.0.0.1", &clock, Arc::new(StaticPolicy::allow_all()));
    let mut actors: Vec<Actor> = ["https://one.example", "https://two.example"]
        .iter()
        .map(|app| {
            let token = adaptor.authenticate(app, None).unwrap().token;
            let events = adaptor.events(&token).unwrap();
            Actor {
                token,
                owned: BTreeSet::new(),
                events,
            }
        })
        .collect();
    let mut all: Vec<(usize, String)> = Vec::new();
    let mut obs = Observations::default();
    let pick = |all: &Vec<(usize, String)>, i: usize| -> Option<(usize, String)> {
        (!all.is_empty()).then(|| all[i % all.len()].clone())
    };

    for op in ops {
        let me = op.actor;
        let token = actors[me].token.clone();
        // (response, owner of the target object)
        let result: Option<(Result<Value, AdaptorError>, usize)> = match &op.action {
            Action::Create(class) => {
                let r = adaptor.create_object(&token, class, json!({}));
                if let Ok(v) = &r {
                    // Nested members (RTP legs, implicit ICE components) join the scope too.
                    let listed = adaptor.list_objects(&token).unwrap();
                    for o in listed {
                        let id = o["object_id"].as_str().unwrap().to_string();
                        if actors[me].owned.insert(id.clone()) {
                            all.push((me, id));
                        }
                    }
                    let _ = v;
                }
                Some((r, me))
            }
            Action::Describe(i) => pick(&all, *i).map(|(owner, id)| (adaptor.describe(&token, &id), owner)),
            Action::Invoke(i, m) => pick(&all, *i).map(|(owner, id)| (adaptor.invoke(&token, &id, m, json!({})), owner)),
            Action::SendTo(i, j) => match (pick(&all, *i), pick(&all, *j)) {
                (Some((owner, from)), Some((_, to))) => {
                    let port = adaptor
                        .list_objects(&actors[owner].token)
                        .ok()
                        .and_then(|l| l.into_iter().find(|o| o["object_id"] == to.as_str()))
                        .and_then(|o| o["state"]["local_port"].as_u64())
                        .unwrap_or(9);
                    let args = json!({ "to": format!("10.0.0.1:{port}"), "data": "cHJvYmU=" });
                    Some((adaptor.invoke(&token, &from, "send", args), owner))
                }
                _ => None,
            },
            Action::Connect(i, j) => match (pick(&all, *i), pick(&all, *j)) {
                (Some((o1, src)), Some((o2, dst))) => {
                    let owner = if o1 != me { o1 } else { o2 };
                    Some((adaptor.connect_objects(&token, &src, &dst), owner))
                }
                _ => None,
            },
            Action::ConnectClient(i) => pick(&all, *i).map(|(owner, id)| (adaptor.connect_objects(&token, &id, "client"), owner)),
            Action::Close(i) => pick(&all, *i).map(|(owner, id)| (adaptor.close_object(&token, &id).map(|_| json!({})), owner)),
            Action::List => Some((adaptor.list_objects(&token).map(Value::from), me)),
            Action::Tick(ms) => {
                clock.advance(*ms);
                adaptor.tick();
                net.pump();
                None
            }
        };
        net.pump();
        if let Some((r, owner)) = result {
            match r {
                Ok(v) => {
                    if owner != me {
                        obs.cross.push(format!("token {me} succeeded on a foreign object: {:?} -> {v}", op.action));
                    }
                    check(me, &actors[me].owned, &v, &format!("{:?}", op.action), &mut obs);
                }
                Err(AdaptorError::Forbidden(_)) if owner != me => obs.refused += 1,
                Err(AdaptorError::NotFound(_)) | Err(AdaptorError::Conflict(_)) | Err(AdaptorError::BadRequest(_)) => {}
                Err(e) if owner == me => {
                    let _ = e;
                }
                Err(e) => obs.cross.push(format!("unexpected {e:?} for {:?}", op.action)),
            }
        }
        for (i, a) in actors.iter_mut().enumerate() {
            check_events(i, a, &mut obs);
        }
    }
    obs
}
