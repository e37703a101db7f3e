#![allow(dead_code)]

pub mod scope;

use std::collections::{HashMap, HashSet, VecDeque};
use std::io;
use std::net::{IpAddr, SocketAddr};
use std::sync::{Arc, Mutex, Weak};

use serde_json::{json, Value};
use webvoice_adaptor::{Adaptor, AdaptorConfig, ApprovalPolicy, BindError, DatagramSink, NetworkBackend, StaticPolicy};
use webvoice_core::MockClock;

#[derive(Default)]
struct Host {
    bound: HashSet<u16>,
    sink: Option<Weak<dyn DatagramSink>>,
    next_port: u16,
}

#[derive(Default)]
struct Switch {
    hosts: HashMap<IpAddr, Host>,
    queue: VecDeque<(SocketAddr, SocketAddr, Vec<u8>)>,
    sent: u64,
    delivered: u64,
}

/// Lossless in-memory network. Datagrams queue on send and are delivered
/// by [`MemNet::pump`].
#[derive(Clone, Default)]
pub struct MemNet(Arc<Mutex<Switch>>);

impl MemNet {
    pub fn host(&self, ip: &str) -> Arc<MemHost> {
        let ip: IpAddr = ip.parse().unwrap();
        self.0.lock().unwrap().hosts.insert(
            ip,
            Host {
                next_port: 40_000,
                ..Default::default()
            },
        );
        Arc::new(MemHost { net: self.clone(), ip })
    }

    pub fn sent(&self) -> u64 {
        self.0.lock().unwrap().sent
    }

    pub fn delivered(&self) -> u64 {
        self.0.lock().unwrap().delivered
    }

    pub fn pump(&self) {
        for _ in 0..10_000 {
            let next = {
                let mut sw = self.0.lock().unwrap();
                let Some((from, to, data)) = sw.queue.pop_front() else {
                    return;
                };
                let sink = sw
                    .hosts
                    .get(&to.ip())
                    .filter(|h| h.bound.contains(&to.port()))
                    .and_then(|h| h.sink.clone())
                    .and_then(|w| w.upgrade());
                if sink.is_some() {
                    sw.delivered += 1;
                }
                sink.map(|s| (s, from, to, data))
            };
            if let Some((sink, from, to, data)) = next {
                sink.on_datagram(to.port(), from, &data);
            }
        }
    }

    pub fn bound(&self, ip: &str) -> Vec<u16> {
        let ip: IpAddr = ip.parse().unwrap();
        let mut v: Vec<u16> = self.0.lock().unwrap().hosts[&ip].bound.iter().copied().collect();
        v.sort();
        v
    }
}

pub struct MemHost {
    net: MemNet,
    ip: IpAddr,
}

impl NetworkBackend for MemHost {
    fn attach(&self, sink: Weak<dyn DatagramSink>) {
        self.net.0.lock().unwrap().hosts.get_mut(&self.ip).unwrap().sink = Some(sink);
    }

    fn bind_udp(&self, port: u16) -> Result<u16, BindError> {
        let mut sw = self.net.0.lock().unwrap();
        let host = sw.hosts.get_mut(&self.ip).unwrap();
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
        self.net.0.lock().unwrap().hosts.get_mut(&self.ip).unwrap().bound.remove(&port);
    }

    fn send_udp(&self, local_port: u16, to: SocketAddr, data: &[u8]) -> io::Result<()> {
        let mut sw = self.net.0.lock().unwrap();
        sw.sent += 1;
        sw.queue
            .push_back((SocketAddr::new(self.ip, local_port), to, data.to_vec()));
        Ok(())
    }

    fn host_address(&self) -> IpAddr {
        self.ip
    }
}

pub fn config() -> AdaptorConfig {
    AdaptorConfig {
        seed: Some(7),
        ..Default::default()
    }
}

pub fn adaptor(net: &MemNet, ip: &str, clock: &Arc<MockClock>, policy: Arc<dyn ApprovalPolicy>) -> Arc<Adaptor> {
    Adaptor::new(config(), clock.clone(), net.host(ip), policy).unwrap()
}

pub fn open(net: &MemNet, ip: &str, clock: &Arc<MockClock>) -> (Arc<Adaptor>, String) {
    let a = adaptor(net, ip, clock, Arc::new(StaticPolicy::allow_all()));
    let token = a.authenticate("https://app.example", None).unwrap().token;
    (a, token)
}

pub fn create(a: &Adaptor, token: &str, class: &str, params: Value) -> String {
    a.create_object(token, class, params).unwrap()["object_id"]
        .as_str()
        .unwrap()
        .to_string()
}

/// Advances `clock` in 10 ms steps, ticking every adaptor and pumping the
/// network after each step.
pub fn run(net: &MemNet, clock: &MockClock, adaptors: &[&Adaptor], ms: u64) {
    for _ in 0..ms / 10 {
        clock.advance(10);
        for a in adaptors {
            a.tick();
        }
        net.pump();
    }
}

pub fn candidates(a: &Adaptor, token: &str, ice: &str) -> Value {
    let out = a.invoke(token, ice, "gather", json!({})).unwrap();
    out["candidates"].clone()
}
