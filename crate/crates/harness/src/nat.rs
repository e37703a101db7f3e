//! NAT behaviour model: mapping and filtering as classified for UDP
//! (endpoint-independent, address-dependent, address-and-port-dependent).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::net::{IpAddr, SocketAddr};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const DEFAULT_BINDING_TTL_MS: u64 = 30_000;
const FIRST_EXTERNAL_PORT: u16 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mapping {
    EndpointIndependent,
    AddressDependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filtering {
    EndpointIndependent,
    AddressDependent,
    AddressAndPortDependent,
}

impl Mapping {
    pub const ALL: [Mapping; 2] = [Mapping::EndpointIndependent, Mapping::AddressDependent];

    pub fn short(&self) -> &'static str {
        match self {
            Mapping::EndpointIndependent => "EIM",
            Mapping::AddressDependent => "ADM",
        }
    }
}

impl Filtering {
    pub const ALL: [Filtering; 3] = [
        Filtering::EndpointIndependent,
        Filtering::AddressDependent,
        Filtering::AddressAndPortDependent,
    ];

    pub fn short(&self) -> &'static str {
        match self {
            Filtering::EndpointIndependent => "EIF",
            Filtering::AddressDependent => "ADF",
            Filtering::AddressAndPortDependent => "APDF",
        }
    }
}

/// A mapping/filtering pair, written `EIM/APDF` in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NatBehavior {
    pub mapping: Mapping,
    pub filtering: Filtering,
}

impl NatBehavior {
    pub const fn new(mapping: Mapping, filtering: Filtering) -> Self {
        Self { mapping, filtering }
    }

    /// All six behaviours, mapping-major.
    pub fn all() -> Vec<NatBehavior> {
        Mapping::ALL
            .iter()
            .flat_map(|m| Filtering::ALL.iter().map(|f| NatBehavior::new(*m, *f)))
            .collect()
    }
}

impl fmt::Display for NatBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.mapping.short(), self.filtering.short())
    }
}

impl FromStr for NatBehavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, f) = s.split_once('/').ok_or_else(|| format!("expected MAPPING/FILTERING, got {s:?}"))?;
        let mapping = Mapping::ALL
            .into_iter()
            .find(|x| x.short().eq_ignore_ascii_case(m))
            .ok_or_else(|| format!("unknown mapping {m:?}"))?;
        let filtering = Filtering::ALL
            .into_iter()
            .find(|x| x.short().eq_ignore_ascii_case(f))
            .ok_or_else(|| format!("unknown filtering {f:?}"))?;
        Ok(Self { mapping, filtering })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outbound,
    Inbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Packet {
    pub src: SocketAddr,
    pub dst: SocketAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// No live binding owns the destination port.
    NoBinding,
    /// A binding exists but the filter refuses the source.
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Outbound: source rewritten to the external endpoint.
    Rewrite(Packet),
    /// Inbound: destination rewritten to the internal endpoint.
    Deliver(Packet),
    Drop(DropReason),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DirectionCounters {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NatCounters {
    pub outbound: DirectionCounters,
    pub inbound: DirectionCounters,
    pub bindings_created: u64,
    pub bindings_expired: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Binding {
    pub internal: SocketAddr,
    pub external: SocketAddr,
    /// Destinations this binding has sent to; drives the filter.
    pub contacted: BTreeSet<SocketAddr>,
    pub expires_at: u64,
}

/// Key under which a mapping is reused: the internal endpoint, plus the
/// destination address for address-dependent mapping.
type MapKey = (SocketAddr, Option<IpAddr>);

#[derive(Debug, Clone)]
pub struct NatModel {
    pub behavior: NatBehavior,
    pub public_ip: IpAddr,
    pub binding_ttl_ms: u64,
    bindings: BTreeMap<u16, Binding>,
    by_key: HashMap<MapKey, u16>,
    next_port: u16,
    counters: NatCounters,
}

impl NatModel {
    pub fn new(behavior: NatBehavior, public_ip: IpAddr) -> Self {
        Self {
            behavior,
            public_ip,
            binding_ttl_ms: DEFAULT_BINDING_TTL_MS,
            bindings: BTreeMap::new(),
            by_key: HashMap::new(),
            next_port: FIRST_EXTERNAL_PORT,
            counters: NatCounters::default(),
        }
    }

    pub fn with_ttl(mut self, ttl_ms: u64) -> Self {
        self.binding_ttl_ms = ttl_ms;
        self
    }

    pub fn counters(&self) -> NatCounters {
        self.counters
    }

    /// Live bindings, by external port.
    pub fn bindings(&self) -> impl Iterator<Item = &Binding> {
        self.bindings.values()
    }

    fn key(&self, internal: SocketAddr, dst: SocketAddr) -> MapKey {
        match self.behavior.mapping {
            Mapping::EndpointIndependent => (internal, None),
            Mapping::AddressDependent => (internal, Some(dst.ip())),
        }
    }

    fn expire(&mut self, now: u64) {
        let dead: Vec<u16> = self
            .bindings
            .iter()
            .filter(|(_, b)| b.expires_at <= now)
            .map(|(p, _)| *p)
            .collect();
        for port in dead {
            self.bindings.remove(&port);
            self.by_key.retain(|_, p| *p != port);
            self.counters.bindings_expired += 1;
        }
    }

    fn allocate_port(&mut self) -> u16 {
        loop {
            let port = self.next_port;
            self.next_port = if self.next_port == u16::MAX {
                FIRST_EXTERNAL_PORT
            } else {
                self.next_port + 1
            };
            if !self.bindings.contains_key(&port) {
                return port;
            }
        }
    }

    fn admits(&self, binding: &Binding, src: SocketAddr) -> bool {
        match self.behavior.filtering {
            Filtering::EndpointIndependent => true,
            Filtering::AddressDependent => binding.contacted.iter().any(|c| c.ip() == src.ip()),
            Filtering::AddressAndPortDependent => binding.contacted.contains(&src),
        }
    }

    /// Translates an outbound packet. Never drops.
    pub fn outbound(&mut self, now: u64, internal: SocketAddr, dst: SocketAddr) -> SocketAddr {
        self.counters.outbound.injected += 1;
        self.expire(now);
        let key = self.key(internal, dst);
        let port = match self.by_key.get(&key) {
            Some(p) => *p,
            None => {
                let p = self.allocate_port();
                self.by_key.insert(key, p);
                self.bindings.insert(
                    p,
                    Binding {
                        internal,
                        external: SocketAddr::new(self.public_ip, p),
                        contacted: BTreeSet::new(),
                        expires_at: 0,
                    },
                );
                self.counters.bindings_created += 1;
                p
            }
        };
        let ttl = self.binding_ttl_ms;
        let binding = self.bindings.get_mut(&port).expect("just ensured");
        binding.contacted.insert(dst);
        binding.expires_at = now + ttl;
        self.counters.outbound.delivered += 1;
        binding.external
    }

    /// Admits or drops an inbound packet addressed to `external_port`.
    pub fn inbound(&mut self, now: u64, src: SocketAddr, external_port: u16) -> Result<SocketAddr, DropReason> {
        self.counters.inbound.injected += 1;
        self.expire(now);
        let verdict = match self.bindings.get(&external_port) {
            None => Err(DropReason::NoBinding),
            Some(b) if !self.admits(b, src) => Err(DropReason::Filtered),
            Some(b) => Ok(b.internal),
        };
        match verdict {
            Ok(_) => self.counters.inbound.delivered += 1,
            Err(_) => self.counters.inbound.dropped += 1,
        }
        verdict
    }

    pub fn process(&mut self, now: u64, direction: Direction, packet: &Packet) -> Verdict {
        match direction {
            Direction::Outbound => {
                let src = self.outbound(now, packet.src, packet.dst);
                Verdict::Rewrite(Packet { src, dst: packet.dst })
            }
            Direction::Inbound => match self.inbound(now, packet.src, packet.dst.port()) {
                Ok(dst) => Verdict::Deliver(Packet { src: packet.src, dst }),
                Err(reason) => Verdict::Drop(reason),
            },
        }
    }
}
