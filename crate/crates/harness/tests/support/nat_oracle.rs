//! Reachability oracle for one ICE check between two hosts behind NATs.
//!
//! Each side has one private host and one NAT. External ports are named by
//! the mapping key that created them, so two endpoints are equal exactly when
//! the NAT would hand out the same port. Every datagram either side can ever
//! send is replayed until the set of bindings and permissions stops growing;
//! the check succeeds if, in that closure, a ping is admitted by the far NAT
//! and its pong is admitted on the way back.

use std::collections::{BTreeMap, BTreeSet};

use webvoice_harness::{Filtering, Mapping, NatBehavior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Side(usize),
    Reflector,
}

/// Port on a NAT, named by the destination that created it (None under
/// endpoint-independent mapping).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Port {
    Nat(Option<Node>),
    Reflector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Endpoint {
    node: Node,
    port: Port,
}

const REFLECTOR: Endpoint = Endpoint {
    node: Node::Reflector,
    port: Port::Reflector,
};

#[derive(Default)]
struct Nats {
    /// (side, port) -> endpoints that side has sent to through that port.
    permits: BTreeMap<(usize, Port), BTreeSet<Endpoint>>,
}

impl Nats {
    fn send(&mut self, behavior: &[NatBehavior; 2], side: usize, dst: Endpoint) -> Endpoint {
        let key = match behavior[side].mapping {
            Mapping::EndpointIndependent => None,
            Mapping::AddressDependent => Some(dst.node),
        };
        let port = Port::Nat(key);
        self.permits.entry((side, port)).or_default().insert(dst);
        Endpoint {
            node: Node::Side(side),
            port,
        }
    }

    fn admits(&self, behavior: &[NatBehavior; 2], side: usize, port: Port, from: Endpoint) -> bool {
        let Some(permits) = self.permits.get(&(side, port)) else {
            return false;
        };
        match behavior[side].filtering {
            Filtering::EndpointIndependent => true,
            Filtering::AddressDependent => permits.iter().any(|p| p.node == from.node),
            Filtering::AddressAndPortDependent => permits.contains(&from),
        }
    }

    fn size(&self) -> usize {
        self.permits.values().map(BTreeSet::len).sum::<usize>() + self.permits.len()
    }
}

/// Whether the two sides can complete a connectivity check.
pub fn reachable(a: NatBehavior, b: NatBehavior) -> bool {
    let behavior = [a, b];
    let mut nats = Nats::default();
    let srflx = [nats.send(&behavior, 0, REFLECTOR), nats.send(&behavior, 1, REFLECTOR)];
    let mut success = false;
    loop {
        let before = nats.size();
        for (x, y) in [(0, 1), (1, 0)] {
            let ping_from = nats.send(&behavior, x, srflx[y]);
            if !nats.admits(&behavior, y, srflx[y].port, ping_from) {
                continue;
            }
            let pong_from = nats.send(&behavior, y, ping_from);
            if !nats.admits(&behavior, x, ping_from.port, pong_from) {
                continue;
            }
            success = true;
            nats.send(&behavior, x, pong_from);
        }
        if nats.size() == before {
            return success;
        }
    }
}

/// Hand-derived form of [`reachable`], kept as a cross-check.
pub fn closed_form(a: NatBehavior, b: NatBehavior) -> bool {
    let eim = |n: NatBehavior| n.mapping == Mapping::EndpointIndependent;
    let ping_ok = |x: NatBehavior, y: NatBehavior| match y.filtering {
        Filtering::EndpointIndependent => true,
        Filtering::AddressDependent => eim(y),
        Filtering::AddressAndPortDependent => eim(y) && eim(x),
    };
    let pong_ok = |x: NatBehavior, y: NatBehavior| x.filtering != Filtering::AddressAndPortDependent || eim(y);
    (ping_ok(a, b) && pong_ok(a, b)) || (ping_ok(b, a) && pong_ok(b, a))
}
