//! Signaling server, adaptors and softphones on one mock clock, connected
//! through a [`SimNetwork`]. Meant for a paused current-thread runtime:
//! every step sleeps 10 ms of virtual time, advances the clock, ticks the
//! adaptors and pumps the network.

use std::future::Future;
use std::net::IpAddr;
use std::sync::Arc;
use std::time::Duration;

use webvoice_adaptor::{inline_router, Adaptor, AdaptorConfig, ApprovalPolicy};
use webvoice_core::MockClock;
use webvoice_sdk::{HttpLike, PhoneConfig, PhoneHandle, Recorder, RouterClient, Softphone, TraceLog};
use webvoice_signaling::auth::Credentials;
use webvoice_signaling::{router, SequentialIds, SignalingServer};

use crate::sim::{LinkConfig, SimNetwork};

/// Mock clock origin, in milliseconds since the epoch.
pub const START_MS: u64 = 1_700_000_000_000;
pub const STEP_MS: u64 = 10;
const REAP_EVERY_MS: u64 = 1_000;

pub struct Party {
    pub phone: PhoneHandle,
    pub adaptor: Arc<Adaptor>,
}

pub struct SimWorld {
    pub clock: Arc<MockClock>,
    pub server: Arc<SignalingServer>,
    pub net: SimNetwork,
    pub trace: TraceLog,
    adaptors: Vec<Arc<Adaptor>>,
    signaling: Arc<dyn HttpLike>,
    seed: u64,
}

impl SimWorld {
    /// Contacts are numbered from `c2` and conferences from `c123`.
    pub fn new(seed: u64, link: LinkConfig, secret: &str) -> std::io::Result<Self> {
        let clock = MockClock::new(START_MS);
        let server = Arc::new(
            SignalingServer::builder()
                .clock(clock.clone())
                .ids(SequentialIds::new(2, 123))
                .credentials(Credentials::shared(secret))
                .build()?,
        );
        let signaling: Arc<dyn HttpLike> = Arc::new(RouterClient::new(router(server.clone())));
        Ok(Self {
            net: SimNetwork::new(clock.clone(), link, seed),
            clock,
            server,
            trace: TraceLog::default(),
            adaptors: Vec::new(),
            signaling,
            seed,
        })
    }

    pub fn elapsed_ms(&self) -> u64 {
        use webvoice_core::Clock;
        self.clock.now_ms() - START_MS
    }

    pub fn adaptor(
        &mut self,
        ip: IpAddr,
        nat: Option<IpAddr>,
        policy: Arc<dyn ApprovalPolicy>,
    ) -> std::io::Result<(Arc<Adaptor>, Arc<dyn HttpLike>)> {
        let config = AdaptorConfig {
            seed: Some(self.seed.wrapping_mul(1_000).wrapping_add(self.adaptors.len() as u64 + 1)),
            ..Default::default()
        };
        let a = Adaptor::new(config, self.clock.clone(), self.net.host(ip, nat), policy)?;
        self.adaptors.push(a.clone());
        let http: Arc<dyn HttpLike> = Arc::new(RouterClient::new(inline_router(a.clone())));
        Ok((a, http))
    }

    /// Signaling transport that records under `actor`.
    pub fn signaling_for(&self, actor: &str) -> Arc<dyn HttpLike> {
        Arc::new(Recorder::new(self.signaling.clone(), actor, self.trace.clone()))
    }

    pub fn phone(
        &mut self,
        actor: &str,
        config: PhoneConfig,
        ip: IpAddr,
        nat: Option<IpAddr>,
        policy: Arc<dyn ApprovalPolicy>,
    ) -> std::io::Result<Party> {
        let (adaptor, http) = self.adaptor(ip, nat, policy)?;
        let phone = Softphone::spawn_with_clock(config, self.signaling_for(actor), http, self.clock.clone());
        Ok(Party { phone, adaptor })
    }

    /// One step of virtual time.
    pub async fn step(&self) {
        tokio::time::sleep(Duration::from_millis(STEP_MS)).await;
        let now = self.clock.advance(STEP_MS);
        for a in &self.adaptors {
            a.tick();
        }
        self.net.pump();
        if (now - START_MS) % REAP_EVERY_MS == 0 {
            self.server.reap();
        }
    }

    /// Lets spawned tasks run without moving the mock clock.
    pub async fn settle(&self) {
        tokio::time::sleep(Duration::from_millis(1)).await;
    }

    pub async fn run(&self, ms: u64) {
        for _ in 0..ms / STEP_MS {
            self.step().await;
        }
        self.settle().await;
    }

    /// Steps until `done` holds, for at most `max_ms`. Returns the time spent.
    pub async fn run_until(&self, max_ms: u64, done: impl Fn() -> bool) -> Option<u64> {
        let mut spent = 0;
        self.settle().await;
        while !done() {
            if spent >= max_ms {
                return None;
            }
            self.step().await;
            spent += STEP_MS;
        }
        Some(spent)
    }

    /// Polls `fut` while stepping the world, for at most `max_ms`.
    pub async fn drive<F: Future>(&self, max_ms: u64, fut: F) -> Option<F::Output> {
        tokio::pin!(fut);
        let mut spent = 0;
        loop {
            tokio::select! {
                biased;
                out = &mut fut => return Some(out),
                _ = self.step() => spent += STEP_MS,
            }
            if spent > max_ms {
                return None;
            }
        }
    }
}

/// Current-thread runtime with virtual time, for simulations.
pub fn sim_runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .start_paused(true)
        .build()
}
