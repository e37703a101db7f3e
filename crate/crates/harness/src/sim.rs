//! Deterministic UDP network for adaptors. Hosts sit either on the public
//! side or behind a [`NatModel`]; datagrams wait in a queue until
//! [`SimNetwork::pump`] delivers them against the mock clock.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io;
use std::net::{IpAddr, SocketAddr};
use std::sync::{Arc, Mutex, MutexGuard, Weak};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use webvoice_adaptor::{BindError, DatagramSink, NetworkBackend};
use webvoice_core::SharedClock;

use crate::nat::{NatBehavior, NatCounters, NatModel};

const FIRST_HOST_PORT: u16 = 40_000;
const PUMP_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkConfig {
    /// One-way delay applied to every datagram.
    pub delay_ms: u64,
    /// Independent loss probability per datagram.
    pub loss: f64,
    /// Drops every datagram.
    pub block_all: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            delay_ms: 0,
            loss: 0.0,
            block_all: false,
        }
    }
}

/// Network-wide totals. Every sent datagram ends in exactly one bucket
/// once the queue is empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NetCounters {
    pub injected: u64,
    pub delivered: u64,
    pub lost: u64,
    pub blocked: u64,
    pub filtered: u64,
    pub unroutable: u64,
    pub in_flight: u64,
}

impl NetCounters {
    pub fn conserved(&self) -> bool {
        self.injected == self.delivered + self.lost + self.blocked + self.filtered + self.unroutable + self.in_flight
    }
}

struct HostState {
    /// Public address of the NAT this host sits behind.
    nat: Option<IpAddr>,
    bound: BTreeSet<u16>,
    sink: Option<Weak<dyn DatagramSink>>,
    next_port: u16,
}

struct InFlight {
    deliver_at: u64,
    from: SocketAddr,
    /// NAT realm of the sender, for private destinations.
    realm: Option<IpAddr>,
    to: SocketAddr,
    data: Vec<u8>,
}

struct State {
    clock: SharedClock,
    link: LinkConfig,
    rng: StdRng,
    reflector: Option<SocketAddr>,
    hosts: BTreeMap<IpAddr, HostState>,
    nats: BTreeMap<IpAddr, NatModel>,
    queue: VecDeque<InFlight>,
    counters: NetCounters,
}

enum Route {
    Host(IpAddr, u16),
    Drop,
}

impl State {
    fn route(&mut self, now: u64, pkt: &InFlight) -> Route {
        if let Some(nat) = self.nats.get_mut(&pkt.to.ip()) {
            return match nat.inbound(now, pkt.from, pkt.to.port()) {
                Ok(internal) => Route::Host(internal.ip(), internal.port()),
                Err(_) => {
                    self.counters.filtered += 1;
                    Route::Drop
                }
            };
        }
        match self.hosts.get(&pkt.to.ip()) {
            Some(h) if h.nat.is_none() || h.nat == pkt.realm => Route::Host(pkt.to.ip(), pkt.to.port()),
            _ => {
                self.counters.unroutable += 1;
                Route::Drop
            }
        }
    }
}

/// Shared handle to the simulated network.
#[derive(Clone)]
pub struct SimNetwork(Arc<Mutex<State>>);

impl SimNetwork {
    pub fn new(clock: SharedClock, link: LinkConfig, seed: u64) -> Self {
        Self(Arc::new(Mutex::new(State {
            clock,
            link,
            rng: StdRng::seed_from_u64(seed),
            reflector: None,
            hosts: BTreeMap::new(),
            nats: BTreeMap::new(),
            queue: VecDeque::new(),
            counters: NetCounters::default(),
        })))
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.0.lock().unwrap()
    }

    /// Address that answers server-reflexive queries.
    pub fn set_reflector(&self, addr: SocketAddr) {
        self.lock().reflector = Some(addr);
    }

    pub fn set_link(&self, link: LinkConfig) {
        self.lock().link = link;
    }

    pub fn add_nat(&self, public_ip: IpAddr, behavior: NatBehavior) {
        self.lock().nats.insert(public_ip, NatModel::new(behavior, public_ip));
    }

    pub fn add_nat_model(&self, model: NatModel) {
        self.lock().nats.insert(model.public_ip, model);
    }

    /// Adds a host, optionally behind the NAT at `nat`.
    pub fn host(&self, ip: IpAddr, nat: Option<IpAddr>) -> Arc<SimHost> {
        let mut s = self.lock();
        if let Some(n) = nat {
            assert!(s.nats.contains_key(&n), "unknown NAT {n}");
        }
        s.hosts.insert(
            ip,
            HostState {
                nat,
                bound: BTreeSet::new(),
                sink: None,
                next_port: FIRST_HOST_PORT,
            },
        );
        Arc::new(SimHost { net: self.clone(), ip })
    }

    pub fn counters(&self) -> NetCounters {
        let s = self.lock();
        NetCounters {
            in_flight: s.queue.len() as u64,
            ..s.counters
        }
    }

    pub fn nat_counters(&self, public_ip: IpAddr) -> Option<NatCounters> {
        self.lock().nats.get(&public_ip).map(NatModel::counters)
    }

    pub fn bound(&self, ip: IpAddr) -> Vec<u16> {
        self.lock()
            .hosts
            .get(&ip)
            .map(|h| h.bound.iter().copied().collect())
            .unwrap_or_default()
    }

    /// Delivers every datagram that is due, including ones sent in
    /// response while pumping.
    pub fn pump(&self) {
        for _ in 0..PUMP_LIMIT {
            let next = {
                let mut s = self.lock();
                let now = s.clock.now_ms();
                let Some(idx) = s.queue.iter().position(|p| p.deliver_at <= now) else {
                    return;
                };
                let pkt = s.queue.remove(idx).expect("index from position");
                match s.route(now, &pkt) {
                    Route::Drop => None,
                    Route::Host(ip, port) => {
                        let sink = s
                            .hosts
                            .get(&ip)
                            .filter(|h| h.bound.contains(&port))
                            .and_then(|h| h.sink.clone())
                            .and_then(|w| w.upgrade());
                        match sink {
                            Some(sink) => {
                                s.counters.delivered += 1;
                                Some((sink, port, pkt))
                            }
                            None => {
                                s.counters.unroutable += 1;
                                None
                            }
                        }
                    }
                }
            };
            if let Some((sink, port, pkt)) = next {
                sink.on_datagram(port, pkt.from, &pkt.data);
            }
        }
    }
}

/// One host's view of the network; implements the adaptor backend.
pub struct SimHost {
    net: SimNetwork,
    ip: IpAddr,
}

impl SimHost {
    pub fn ip(&self) -> IpAddr {
        self.ip
    }
}

impl NetworkBackend for SimHost {
    fn attach(&self, sink: Weak<dyn DatagramSink>) {
        if let Some(h) = self.net.lock().hosts.get_mut(&self.ip) {
            h.sink = Some(sink);
        }
    }

    fn bind_udp(&self, port: u16) -> Result<u16, BindError> {
        let mut s = self.net.lock();
        let host = s.hosts.get_mut(&self.ip).expect("host registered");
        let port = if port == 0 {
            while host.bound.contains(&host.next_port) {
                host.next_port += 1;
            }
            host.next_port
        } else {
            port
        };
        if !host.bound.insert(port) {
            return Err(BindError::InUse(port));
        }
        Ok(port)
    }

    fn close_udp(&self, port: u16) {
        if let Some(h) = self.net.lock().hosts.get_mut(&self.ip) {
            h.bound.remove(&port);
        }
    }

    fn send_udp(&self, local_port: u16, to: SocketAddr, data: &[u8]) -> io::Result<()> {
        let mut s = self.net.lock();
        let now = s.clock.now_ms();
        s.counters.injected += 1;
        if s.link.block_all {
            s.counters.blocked += 1;
            return Ok(());
        }
        let inside = SocketAddr::new(self.ip, local_port);
        let realm = s.hosts.get(&self.ip).and_then(|h| h.nat);
        let same_realm = realm.is_some() && s.hosts.get(&to.ip()).is_some_and(|h| h.nat == realm);
        let from = match realm {
            Some(nat) if !same_realm => s.nats.get_mut(&nat).expect("nat registered").outbound(now, inside, to),
            _ => inside,
        };
        let loss = s.link.loss;
        if loss > 0.0 && s.rng.random::<f64>() < loss {
            s.counters.lost += 1;
            return Ok(());
        }
        let deliver_at = now + s.link.delay_ms;
        s.queue.push_back(InFlight {
            deliver_at,
            from,
            realm,
            to,
            data: data.to_vec(),
        });
        Ok(())
    }

    fn host_address(&self) -> IpAddr {
        self.ip
    }

    fn reflector(&self) -> Option<SocketAddr> {
        self.net.lock().reflector
    }

    /// A binding request and its answer, exchanged instantly.
    fn reflexive_address(&self, local_port: u16) -> Option<SocketAddr> {
        let mut s = self.net.lock();
        let reflector = s.reflector?;
        if s.link.block_all {
            return None;
        }
        let now = s.clock.now_ms();
        let inside = SocketAddr::new(self.ip, local_port);
        let Some(nat_ip) = s.hosts.get(&self.ip).and_then(|h| h.nat) else {
            return Some(inside);
        };
        let nat = s.nats.get_mut(&nat_ip).expect("nat registered");
        let mapped = nat.outbound(now, inside, reflector);
        nat.inbound(now, reflector, mapped.port()).ok().map(|_| mapped)
    }
}
