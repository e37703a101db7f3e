//! ICE-lite connectivity establishment over a three-way JSON check
//! exchange. Pure state machine: the caller feeds it datagrams and clock
//! ticks and carries out the returned [`IceOutput`]s.

use std::collections::{HashMap, HashSet};
use std::net::{IpAddr, SocketAddr};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use webvoice_core::TransportCandidate;

/// Largest datagram that is considered as a connectivity check.
pub const MAX_CHECK_LEN: usize = 128;

const HOST_TYPE_PREF: u32 = 126;
const SRFLX_TYPE_PREF: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcePhase {
    New,
    Gathering,
    Gathered,
    Checking,
    Connected,
    Failed,
}

impl IcePhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            IcePhase::New => "new",
            IcePhase::Gathering => "gathering",
            IcePhase::Gathered => "gathered",
            IcePhase::Checking => "checking",
            IcePhase::Connected => "connected",
            IcePhase::Failed => "failed",
        }
    }

    /// Edges of the phase graph.
    pub fn can_move_to(self, next: IcePhase) -> bool {
        use IcePhase::*;
        matches!(
            (self, next),
            (New, Gathering) | (Gathering, Gathered) | (Gathered, Checking) | (Checking, Connected) | (Checking, Failed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckType {
    Ping,
    Pong,
    Ack,
}

/// On-the-wire check datagram: `{"t":"ping","txid":"0a1b..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckMessage {
    pub t: CheckType,
    pub txid: String,
}

impl CheckMessage {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("serializable")
    }

    /// Recognizes a check datagram. RTP never starts with `{` (version bits).
    pub fn decode(data: &[u8]) -> Option<Self> {
        if data.first() != Some(&b'{') || data.len() > MAX_CHECK_LEN {
            return None;
        }
        serde_json::from_slice(data).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateType {
    Host,
    Srflx,
}

/// A gathered local candidate and the socket it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalCandidate {
    pub candidate: TransportCandidate,
    pub kind: CandidateType,
    pub base_port: u16,
}

/// Candidate priority: type preference, then a per-candidate local
/// preference so priorities never collide within one agent.
pub fn candidate_priority(kind: &CandidateType, index: usize) -> u32 {
    let type_pref = match kind {
        CandidateType::Host => HOST_TYPE_PREF,
        CandidateType::Srflx => SRFLX_TYPE_PREF,
    };
    let local_pref = 0xFFFF - (index as u32 & 0xFFFF);
    (type_pref << 24) | (local_pref << 8) | 0xFF
}

pub fn pair_priority(local: u32, remote: u32) -> u64 {
    u64::from(local) * 65_536 + u64::from(remote)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairState {
    Waiting,
    InProgress,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidatePair {
    pub local: SocketAddr,
    pub base_port: u16,
    pub remote: SocketAddr,
    pub priority: u64,
    pub state: PairState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip)]
    txid: String,
    #[serde(skip)]
    started_at: u64,
    #[serde(skip)]
    next_send: u64,
    #[serde(skip)]
    sends: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SelectedPair {
    pub local: SocketAddr,
    pub local_port: u16,
    pub remote: SocketAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IceConfig {
    pub retransmit_ms: u64,
    /// Retransmissions after the first ping.
    pub max_retries: u32,
    pub pair_timeout_ms: u64,
    /// Interval between starting successive pairs.
    pub pacing_ms: u64,
}

impl Default for IceConfig {
    fn default() -> Self {
        Self {
            retransmit_ms: 100,
            max_retries: 5,
            pair_timeout_ms: 1_500,
            pacing_ms: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IceOutput {
    Send { local_port: u16, to: SocketAddr, data: Vec<u8> },
    Phase { phase: IcePhase, detail: Value },
    PingResult { remote: SocketAddr, rtt_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IceError {
    #[error("operation not valid in phase {0}")]
    WrongPhase(&'static str),
    #[error("remote candidate list is empty")]
    NoRemoteCandidates,
}

#[derive(Debug)]
pub struct IceAgent {
    config: IceConfig,
    phase: IcePhase,
    locals: Vec<LocalCandidate>,
    remotes: Vec<TransportCandidate>,
    pairs: Vec<CandidatePair>,
    selected: Option<SelectedPair>,
    pongs_sent: HashMap<String, (u16, SocketAddr)>,
    pings_out: HashMap<String, u64>,
    next_start: u64,
    txid_prefix: u32,
    txid_counter: u64,
}

impl IceAgent {
    /// `txid_prefix` distinguishes this agent's transactions from others.
    pub fn new(config: IceConfig, txid_prefix: u32) -> Self {
        Self {
            config,
            phase: IcePhase::New,
            locals: Vec::new(),
            remotes: Vec::new(),
            pairs: Vec::new(),
            selected: None,
            pongs_sent: HashMap::new(),
            pings_out: HashMap::new(),
            next_start: 0,
            txid_prefix,
            txid_counter: 0,
        }
    }

    pub fn phase(&self) -> IcePhase {
        self.phase
    }

    pub fn selected(&self) -> Option<SelectedPair> {
        self.selected
    }

    pub fn pairs(&self) -> &[CandidatePair] {
        &self.pairs
    }

    pub fn local_candidates(&self) -> Vec<TransportCandidate> {
        self.locals.iter().map(|l| l.candidate.clone()).collect()
    }

    pub fn locals(&self) -> &[LocalCandidate] {
        &self.locals
    }

    pub fn remote_candidates(&self) -> &[TransportCandidate] {
        &self.remotes
    }

    fn next_txid(&mut self) -> String {
        self.txid_counter += 1;
        format!("{:08x}{:08x}", self.txid_prefix, self.txid_counter)
    }

    fn transition(&mut self, next: IcePhase, detail: Value, out: &mut Vec<IceOutput>) {
        debug_assert!(self.phase.can_move_to(next), "{:?} -> {:?}", self.phase, next);
        self.phase = next;
        out.push(IceOutput::Phase { phase: next, detail });
    }

    /// Marks the start of gathering.
    pub fn begin_gathering(&mut self) -> Result<Vec<IceOutput>, IceError> {
        if self.phase != IcePhase::New {
            return Err(IceError::WrongPhase(self.phase.as_str()));
        }
        let mut out = Vec::new();
        self.transition(IcePhase::Gathering, json!({}), &mut out);
        Ok(out)
    }

    /// Installs the gathered candidates. `sockets` lists each component's
    /// host address with its optional server-reflexive mapping.
    pub fn finish_gathering(
        &mut self,
        sockets: &[(SocketAddr, Option<SocketAddr>)],
    ) -> Result<Vec<IceOutput>, IceError> {
        if self.phase != IcePhase::Gathering {
            return Err(IceError::WrongPhase(self.phase.as_str()));
        }
        let mut locals = Vec::new();
        for (host, srflx) in sockets {
            let idx = locals.len();
            locals.push(LocalCandidate {
                candidate: TransportCandidate::udp(*host, candidate_priority(&CandidateType::Host, idx)),
                kind: CandidateType::Host,
                base_port: host.port(),
            });
            if let Some(mapped) = srflx.filter(|m| m != host) {
                let idx = locals.len();
                locals.push(LocalCandidate {
                    candidate: TransportCandidate::udp(mapped, candidate_priority(&CandidateType::Srflx, idx)),
                    kind: CandidateType::Srflx,
                    base_port: host.port(),
                });
            }
        }
        self.locals = locals;
        let mut out = Vec::new();
        let detail = json!({ "candidates": self.local_candidates() });
        self.transition(IcePhase::Gathered, detail, &mut out);
        Ok(out)
    }

    /// Forms the check list: every local base × every remote UDP candidate,
    /// highest pair priority first. Server-reflexive locals are replaced by
    /// their host base, so each socket pairs with each remote once.
    pub fn set_remote_candidates(&mut self, remotes: Vec<TransportCandidate>) -> Result<usize, IceError> {
        if self.phase != IcePhase::Gathered {
            return Err(IceError::WrongPhase(self.phase.as_str()));
        }
        if remotes.is_empty() {
            return Err(IceError::NoRemoteCandidates);
        }
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for local in self.locals.iter().filter(|l| l.kind == CandidateType::Host) {
            for remote in remotes.iter().filter(|r| r.kind == local.candidate.kind) {
                let key = (local.base_port, remote.socket_addr());
                if !seen.insert(key) {
                    continue;
                }
                pairs.push(CandidatePair {
                    local: local.candidate.socket_addr(),
                    base_port: local.base_port,
                    remote: remote.socket_addr(),
                    priority: pair_priority(local.candidate.priority, remote.priority),
                    state: PairState::Waiting,
                    failure: None,
                    txid: String::new(),
                    started_at: 0,
                    next_send: 0,
                    sends: 0,
                });
            }
        }
        pairs.sort_by(|a, b| {
            b.priority
                .cmp(&a.priority)
                .then_with(|| a.local.cmp(&b.local))
                .then_with(|| a.remote.cmp(&b.remote))
        });
        self.remotes = remotes;
        self.pairs = pairs;
        Ok(self.pairs.len())
    }

    /// Enters checking. Pairs whose remote address is in `denied` fail at once.
    pub fn start_checks(&mut self, now: u64, denied: &HashSet<IpAddr>) -> Result<Vec<IceOutput>, IceError> {
        if self.phase != IcePhase::Gathered {
            return Err(IceError::WrongPhase(self.phase.as_str()));
        }
        if self.remotes.is_empty() {
            return Err(IceError::NoRemoteCandidates);
        }
        let mut out = Vec::new();
        self.transition(IcePhase::Checking, json!({ "pairs": self.pairs.len() }), &mut out);
        for pair in &mut self.pairs {
            if denied.contains(&pair.remote.ip()) {
                pair.state = PairState::Failed;
                pair.failure = Some("denied".into());
            }
        }
        self.next_start = now;
        out.extend(self.poll(now));
        Ok(out)
    }

    fn ping(&mut self, idx: usize, now: u64, out: &mut Vec<IceOutput>) {
        let pair = &mut self.pairs[idx];
        pair.sends += 1;
        pair.next_send = now + self.config.retransmit_ms;
        let msg = CheckMessage {
            t: CheckType::Ping,
            txid: pair.txid.clone(),
        };
        out.push(IceOutput::Send {
            local_port: pair.base_port,
            to: pair.remote,
            data: msg.encode(),
        });
    }

    /// Drives pacing, retransmission and timeouts.
    pub fn poll(&mut self, now: u64) -> Vec<IceOutput> {
        let mut out = Vec::new();
        if self.phase != IcePhase::Checking {
            return out;
        }
        for idx in 0..self.pairs.len() {
            let pair = &self.pairs[idx];
            if pair.state == PairState::InProgress {
                if now >= pair.started_at + self.config.pair_timeout_ms {
                    let pair = &mut self.pairs[idx];
                    pair.state = PairState::Failed;
                    pair.failure = Some("timeout".into());
                } else if now >= pair.next_send && pair.sends <= self.config.max_retries {
                    self.ping(idx, now, &mut out);
                }
            }
        }
        while now >= self.next_start {
            let Some(idx) = self.pairs.iter().position(|p| p.state == PairState::Waiting) else {
                break;
            };
            let txid = self.next_txid();
            let pair = &mut self.pairs[idx];
            pair.state = PairState::InProgress;
            pair.txid = txid;
            pair.started_at = now;
            self.ping(idx, now, &mut out);
            self.next_start += self.config.pacing_ms;
        }
        if self.pairs.iter().all(|p| p.state == PairState::Failed) {
            let failures: Vec<Value> = self
                .pairs
                .iter()
                .map(|p| json!({ "local": p.local, "remote": p.remote, "reason": p.failure }))
                .collect();
            self.transition(IcePhase::Failed, json!({ "failures": failures }), &mut out);
        }
        out
    }

    fn connect(&mut self, local_port: u16, remote: SocketAddr, out: &mut Vec<IceOutput>) {
        let local = self
            .locals
            .iter()
            .find(|l| l.base_port == local_port && l.kind == CandidateType::Host)
            .map(|l| l.candidate.socket_addr())
            .unwrap_or_else(|| SocketAddr::new(IpAddr::from([0, 0, 0, 0]), local_port));
        let selected = SelectedPair {
            local,
            local_port,
            remote,
        };
        self.selected = Some(selected);
        self.transition(IcePhase::Connected, json!({ "selected_pair": selected }), out);
    }

    /// Handles a check datagram received on `local_port`.
    pub fn on_message(&mut self, local_port: u16, from: SocketAddr, msg: &CheckMessage, now: u64) -> Vec<IceOutput> {
        let mut out = Vec::new();
        match msg.t {
            CheckType::Ping => {
                if matches!(self.phase, IcePhase::Gathered | IcePhase::Checking | IcePhase::Connected) {
                    self.pongs_sent.insert(msg.txid.clone(), (local_port, from));
                    let pong = CheckMessage {
                        t: CheckType::Pong,
                        txid: msg.txid.clone(),
                    };
                    out.push(IceOutput::Send {
                        local_port,
                        to: from,
                        data: pong.encode(),
                    });
                }
            }
            CheckType::Pong => match self.phase {
                IcePhase::Checking => {
                    let hit = self.pairs.iter().position(|p| {
                        p.state == PairState::InProgress && p.txid == msg.txid && p.base_port == local_port
                    });
                    if let Some(idx) = hit {
                        self.pairs[idx].state = PairState::Succeeded;
                        let ack = CheckMessage {
                            t: CheckType::Ack,
                            txid: msg.txid.clone(),
                        };
                        out.push(IceOutput::Send {
                            local_port,
                            to: from,
                            data: ack.encode(),
                        });
                        self.connect(local_port, from, &mut out);
                    }
                }
                IcePhase::Connected => {
                    if let Some(sent) = self.pings_out.remove(&msg.txid) {
                        out.push(IceOutput::PingResult {
                            remote: from,
                            rtt_ms: now.saturating_sub(sent),
                        });
                    }
                }
                _ => {}
            },
            CheckType::Ack => {
                if self.phase == IcePhase::Checking {
                    if let Some(&(port, remote)) = self.pongs_sent.get(&msg.txid) {
                        if port == local_port && remote == from {
                            self.connect(port, remote, &mut out);
                        }
                    }
                }
            }
        }
        out
    }

    /// Sends a round-trip probe over the selected pair.
    pub fn ping_selected(&mut self, now: u64) -> Result<Vec<IceOutput>, IceError> {
        let Some(sel) = self.selected else {
            return Err(IceError::WrongPhase(self.phase.as_str()));
        };
        let txid = self.next_txid();
        self.pings_out.insert(txid.clone(), now);
        let msg = CheckMessage { t: CheckType::Ping, txid };
        Ok(vec![IceOutput::Send {
            local_port: sel.local_port,
            to: sel.remote,
            data: msg.encode(),
        }])
    }

    pub fn describe(&self) -> Value {
        json!({
            "phase": self.phase,
            "local_candidates": self.local_candidates(),
            "remote_candidates": self.remotes,
            "pairs": self.pairs,
            "selected_pair": self.selected,
        })
    }
}
