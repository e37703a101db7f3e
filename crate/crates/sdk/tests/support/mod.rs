#![allow(dead_code)]

#[path = "../../../adaptor/tests/support/mod.rs"]
pub mod net;

use std::sync::Arc;
use std::time::Duration;

use net::MemNet;
use webvoice_adaptor::{inline_router, Adaptor, AdaptorConfig, ApprovalPolicy, StaticPolicy};
use webvoice_core::MockClock;
use webvoice_sdk::{HttpLike, PhoneConfig, PhoneHandle, Recorder, RouterClient, Softphone, TraceLog};
use webvoice_signaling::auth::Credentials;
use webvoice_signaling::{router, SequentialIds, SignalingServer};

pub const START_MS: u64 = 1_700_000_000_000;

/// Signaling server, adaptors and an in-memory network on one mock clock.
/// Tests run on a paused tokio runtime; [`World::run`] lets every task
/// settle before each 10 ms step.
pub struct World {
    pub clock: Arc<MockClock>,
    pub server: Arc<SignalingServer>,
    pub net: MemNet,
    pub adaptors: Vec<Arc<Adaptor>>,
    pub trace: TraceLog,
    signaling: Arc<dyn HttpLike>,
}

impl World {
    pub fn new() -> Self {
        let clock = MockClock::new(START_MS);
        let server = Arc::new(
            SignalingServer::builder()
                .clock(clock.clone())
                .ids(SequentialIds::new(2, 123))
                .credentials(Credentials::shared("pw"))
                .build()
                .unwrap(),
        );
        let signaling: Arc<dyn HttpLike> = Arc::new(RouterClient::new(router(server.clone())));
        Self {
            clock,
            server,
            net: MemNet::default(),
            adaptors: Vec::new(),
            trace: TraceLog::default(),
            signaling,
        }
    }

    pub fn adaptor(&mut self, ip: &str, policy: Arc<dyn ApprovalPolicy>) -> (Arc<Adaptor>, Arc<dyn HttpLike>) {
        let config = AdaptorConfig {
            seed: Some(self.adaptors.len() as u64 + 1),
            ..Default::default()
        };
        let a = Adaptor::new(config, self.clock.clone(), self.net.host(ip), policy).unwrap();
        self.adaptors.push(a.clone());
        let http: Arc<dyn HttpLike> = Arc::new(RouterClient::new(inline_router(a.clone())));
        (a, http)
    }

    pub fn signaling_for(&self, actor: &str) -> Arc<dyn HttpLike> {
        Arc::new(Recorder::new(self.signaling.clone(), actor, self.trace.clone()))
    }

    pub fn phone_with(&mut self, config: PhoneConfig, ip: &str) -> (PhoneHandle, Arc<Adaptor>) {
        let (a, http) = self.adaptor(ip, Arc::new(StaticPolicy::allow_all()));
        let actor = config.aor.split('@').next().unwrap().to_string();
        let phone = Softphone::spawn_with_clock(config, self.signaling_for(&actor), http, self.clock.clone());
        (phone, a)
    }

    pub fn phone(&mut self, aor: &str, ip: &str) -> (PhoneHandle, Arc<Adaptor>) {
        self.phone_with(PhoneConfig::new(aor, "pw"), ip)
    }

    pub async fn settle(&self) {
        tokio::time::sleep(Duration::from_millis(1)).await;
    }

    pub async fn run(&self, ms: u64) {
        for _ in 0..ms / 10 {
            tokio::time::sleep(Duration::from_millis(10)).await;
            self.clock.advance(10);
            for a in &self.adaptors {
                a.tick();
            }
            self.net.pump();
        }
        self.settle().await;
    }

    /// Runs until `done` holds, for at most `max_ms`. Returns the time spent.
    pub async fn run_until(&self, max_ms: u64, done: impl Fn() -> bool) -> Option<u64> {
        let mut spent = 0;
        self.settle().await;
        while !done() {
            if spent >= max_ms {
                return None;
            }
            self.run(10).await;
            spent += 10;
        }
        Some(spent)
    }
}
