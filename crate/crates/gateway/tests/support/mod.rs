#![allow(dead_code)]

pub mod corpus;
pub mod fuzz;
pub mod peer;
#[path = "../../../sdk/tests/support/mod.rs"]
pub mod world;

use std::net::SocketAddr;
use std::sync::Arc;

use webvoice_gateway::{Gateway, GatewayConfig, MemSipNet};

pub const GATEWAY: &str = "192.0.2.1:5060";
pub const REGISTRAR: &str = "192.0.2.2:5060";
pub const PEER: &str = "192.0.2.3:5060";
pub const SIP_USER: &str = "carol@sip.example";

pub fn config() -> GatewayConfig {
    let registrar: SocketAddr = REGISTRAR.parse().unwrap();
    let mut c = GatewayConfig::new("192.0.2.1".parse().unwrap(), registrar, "pw");
    c.next_hop = Some(PEER.parse().unwrap());
    c.sip_users = vec![SIP_USER.to_string()];
    c
}

pub async fn gateway(world: &world::World, net: &MemSipNet) -> Arc<Gateway> {
    let gw = Gateway::start(config(), Arc::new(net.bind(GATEWAY.parse().unwrap())), world.signaling_for("gateway"));
    gw.ready().await;
    gw
}
