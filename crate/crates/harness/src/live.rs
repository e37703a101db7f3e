//! Real sockets: starting the services on TCP/UDP and running a two-party
//! call between two adaptors.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use webvoice_adaptor::{Adaptor, AdaptorConfig, ApprovalPolicy, UdpBackend};
use webvoice_core::SystemClock;
use webvoice_sdk::{CallState, HttpLike, MediaStats, Outcome, PhoneConfig, ReqwestClient, SdkError, Softphone};
use webvoice_signaling::{router, SignalingServer};

pub const TICK: Duration = Duration::from_millis(10);

/// Serves `app` on `listener` until the task is aborted.
fn serve(listener: TcpListener, app: axum::Router) -> JoinHandle<()> {
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "server stopped");
        }
    })
}

pub struct Service {
    pub addr: SocketAddr,
    pub task: JoinHandle<()>,
}

impl Service {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

/// Starts the signaling server and its expiry sweep.
pub async fn start_signaling(listen: SocketAddr, server: Arc<SignalingServer>) -> std::io::Result<Service> {
    let listener = TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let reaper = {
        let server = Arc::downgrade(&server);
        tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_secs(1));
            loop {
                every.tick().await;
                let Some(s) = server.upgrade() else { break };
                s.reap();
            }
        })
    };
    let http = serve(listener, router(server));
    let task = tokio::spawn(async move {
        let _ = http.await;
        reaper.abort();
    });
    Ok(Service { addr, task })
}

pub struct AdaptorService {
    pub service: Service,
    pub adaptor: Arc<Adaptor>,
    ticker: JoinHandle<()>,
}

impl Drop for AdaptorService {
    fn drop(&mut self) {
        self.ticker.abort();
        self.service.task.abort();
    }
}

/// Starts an adaptor with UDP sockets on `media_ip` and its API on `listen`.
pub async fn start_adaptor(
    listen: SocketAddr,
    media_ip: IpAddr,
    config: AdaptorConfig,
    policy: Arc<dyn ApprovalPolicy>,
    widgets: Option<PathBuf>,
) -> std::io::Result<AdaptorService> {
    let backend = Arc::new(UdpBackend::new(media_ip, media_ip, tokio::runtime::Handle::current()));
    let adaptor = Adaptor::new(config, Arc::new(SystemClock), backend, policy)?;
    let ticker = adaptor.spawn_ticker(TICK);
    let listener = TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let task = serve(listener, webvoice_adaptor::router(adaptor.clone(), widgets));
    Ok(AdaptorService {
        service: Service { addr, task },
        adaptor,
        ticker,
    })
}

pub fn loopback(port: u16) -> SocketAddr {
    SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), port)
}

#[derive(Debug, Clone)]
pub struct CallOptions {
    pub from: String,
    pub to: String,
    pub secret: String,
    pub server: String,
    pub caller_adaptor: String,
    pub callee_adaptor: String,
    pub duration: Duration,
    pub setup_timeout: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct CallSample {
    pub elapsed_ms: u64,
    pub caller: MediaStats,
    pub callee: MediaStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct CallSummary {
    pub setup_ms: u64,
    pub codec: Option<String>,
    /// Counters accumulated while the call was up.
    pub caller: MediaStats,
    pub callee: MediaStats,
    pub caller_outcome: Option<Outcome>,
    pub callee_outcome: Option<Outcome>,
}

#[derive(Debug, Error)]
pub enum CallError {
    #[error("cannot reach the adaptor at {0}; install and start it (webvoice adaptor) and retry")]
    AdaptorDown(String),
    #[error("cannot reach the signaling server: {0}")]
    ServerDown(String),
    #[error("{0}")]
    Sdk(#[from] SdkError),
    #[error("call ended before it was set up: caller {caller}, callee {callee}")]
    NotConnected { caller: String, callee: String },
}

impl CallError {
    /// 2 for components that are down, 1 for a call that failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CallError::AdaptorDown(_) | CallError::ServerDown(_) => 2,
            _ => 1,
        }
    }
}

fn diff(a: MediaStats, b: MediaStats) -> MediaStats {
    MediaStats {
        packets_sent: a.packets_sent.saturating_sub(b.packets_sent),
        packets_received: a.packets_received.saturating_sub(b.packets_received),
        frames_played: a.frames_played.saturating_sub(b.frames_played),
        gaps: a.gaps.saturating_sub(b.gaps),
    }
}

async fn reachable(client: &dyn HttpLike, path: &str) -> bool {
    let req = webvoice_sdk::ApiRequest::new(http::Method::GET, path);
    client.send(req).await.is_ok()
}

/// Places a call from `from` to `to` (which answers automatically), keeps it
/// up for `duration` while reporting samples once a second, then hangs up.
pub async fn run_call(opts: &CallOptions, mut on_sample: impl FnMut(&CallSample)) -> Result<CallSummary, CallError> {
    let signaling: Arc<dyn HttpLike> = Arc::new(ReqwestClient::new(&opts.server));
    if !reachable(signaling.as_ref(), "/login").await {
        return Err(CallError::ServerDown(opts.server.clone()));
    }
    for url in [&opts.caller_adaptor, &opts.callee_adaptor] {
        let client = ReqwestClient::new(url.as_str());
        if !reachable(&client, "/objects").await {
            return Err(CallError::AdaptorDown(url.clone()));
        }
    }
    let caller = Softphone::spawn(
        PhoneConfig::new(&opts.from, &opts.secret),
        signaling.clone(),
        Arc::new(ReqwestClient::new(&opts.caller_adaptor)),
    );
    let mut callee_config = PhoneConfig::new(&opts.to, &opts.secret);
    callee_config.auto_answer = true;
    let callee = Softphone::spawn(
        callee_config,
        signaling,
        Arc::new(ReqwestClient::new(&opts.callee_adaptor)),
    );
    for phone in [&caller, &callee] {
        if let Err(e) = phone.login().await {
            return Err(match phone.snapshot().outcome {
                Some(Outcome::InstallHint) => CallError::AdaptorDown(e.to_string()),
                _ => e.into(),
            });
        }
    }
    let started = Instant::now();
    caller.call(&opts.to).await?;
    let connected = tokio::time::timeout(opts.setup_timeout, async {
        let done = |s: &webvoice_sdk::PhoneSnapshot| s.state == CallState::InCall || s.state.is_terminal();
        let a = caller.wait_until(done).await;
        let b = callee.wait_until(done).await;
        a.state == CallState::InCall && b.state == CallState::InCall
    })
    .await
    .unwrap_or(false);
    if !connected {
        let (a, b) = (caller.snapshot(), callee.snapshot());
        let _ = caller.hangup().await;
        let _ = callee.hangup().await;
        return Err(CallError::NotConnected {
            caller: format!("{} {:?}", a.state, a.outcome),
            callee: format!("{} {:?}", b.state, b.outcome),
        });
    }
    let setup_ms = started.elapsed().as_millis() as u64;
    let base_a = caller.media_stats().await?;
    let base_b = callee.media_stats().await?;
    let t0 = Instant::now();
    let mut last = (MediaStats::default(), MediaStats::default());
    while t0.elapsed() < opts.duration {
        let left = opts.duration.saturating_sub(t0.elapsed());
        tokio::time::sleep(left.min(Duration::from_secs(1))).await;
        last = (
            diff(caller.media_stats().await?, base_a),
            diff(callee.media_stats().await?, base_b),
        );
        on_sample(&CallSample {
            elapsed_ms: t0.elapsed().as_millis() as u64,
            caller: last.0,
            callee: last.1,
        });
    }
    let codec = caller.snapshot().codec;
    caller.hangup().await?;
    let _ = tokio::time::timeout(Duration::from_secs(2), callee.wait_until(|s| s.state.is_terminal())).await;
    let _ = caller.logout().await;
    let _ = callee.logout().await;
    Ok(CallSummary {
        setup_ms,
        codec,
        caller: last.0,
        callee: last.1,
        caller_outcome: caller.snapshot().outcome,
        callee_outcome: callee.snapshot().outcome,
    })
}
