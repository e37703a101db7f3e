//! Two adaptors behind configurable NATs running ICE over the simulated
//! network.

use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;

use serde_json::{json, Value};
use webvoice_adaptor::{Adaptor, AdaptorConfig, StaticPolicy};
use webvoice_core::MockClock;
use webvoice_harness::{LinkConfig, NatBehavior, SimNetwork, START_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IceOutcome {
    Connected,
    Failed,
    /// One side connected and the other did not, or a side never finished.
    Split,
}

const NATS: [&str; 2] = ["203.0.113.1", "203.0.113.2"];
const HOSTS: [&str; 2] = ["10.0.1.2", "10.0.2.2"];
const REFLECTOR: &str = "198.51.100.1:3478";

fn ip(s: &str) -> IpAddr {
    s.parse().unwrap()
}

fn id(v: Value) -> String {
    v["object_id"].as_str().unwrap().to_string()
}

/// Gathers and checks on both sides, then steps for up to 3 s of mock time.
pub fn run_ice(a: NatBehavior, b: NatBehavior, seed: u64) -> IceOutcome {
    let clock = MockClock::new(START_MS);
    let net = SimNetwork::new(clock.clone(), LinkConfig::default(), seed);
    net.set_reflector(REFLECTOR.parse::<SocketAddr>().unwrap());
    let mut sides = Vec::new();
    for (i, behavior) in [a, b].into_iter().enumerate() {
        net.add_nat(ip(NATS[i]), behavior);
        let config = AdaptorConfig {
            seed: Some(seed * 10 + i as u64),
            ..Default::default()
        };
        let host = net.host(ip(HOSTS[i]), Some(ip(NATS[i])));
        let adaptor = Adaptor::new(config, clock.clone(), host, Arc::new(StaticPolicy::allow_all())).unwrap();
        let token = adaptor.authenticate("https://app.example", None).unwrap().token;
        let rtp = id(adaptor.create_object(&token, "RtpTransport", json!({})).unwrap());
        let ice = id(adaptor
            .create_object(&token, "IceTransport", json!({ "components": [rtp] }))
            .unwrap());
        sides.push((adaptor, token, ice));
    }
    let cands: Vec<Value> = sides
        .iter()
        .map(|(a, t, ice)| a.invoke(t, ice, "gather", json!({})).unwrap()["candidates"].clone())
        .collect();
    for (i, (a, t, ice)) in sides.iter().enumerate() {
        a.invoke(t, ice, "run", json!({ "candidates": cands[1 - i] })).unwrap();
    }
    let phase = |i: usize| {
        let (a, t, ice) = &sides[i];
        a.describe(t, ice).unwrap()["state"]["phase"].as_str().unwrap().to_string()
    };
    let done = |p: &str| p == "connected" || p == "failed";
    for _ in 0..300 {
        clock.advance(10);
        for (a, _, _) in &sides {
            a.tick();
        }
        net.pump();
        if done(&phase(0)) && done(&phase(1)) {
            break;
        }
    }
    match (phase(0).as_str(), phase(1).as_str()) {
        ("connected", "connected") => IceOutcome::Connected,
        ("failed", "failed") => IceOutcome::Failed,
        _ => IceOutcome::Split,
    }
}
