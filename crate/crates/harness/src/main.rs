use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use tokio::net::TcpListener;
use webvoice_adaptor::{AdaptorConfig, ApprovalPolicy, FilePolicy, PromptPolicy, StaticPolicy, TokenFile};
use webvoice_gateway::{Gateway, GatewayConfig, UdpSipSocket, DEFAULT_SIP_PORT};
use webvoice_harness::live::{self, CallError, CallOptions};
use webvoice_harness::scenario;
use webvoice_sdk::ReqwestClient;
use webvoice_signaling::auth::Credentials;
use webvoice_signaling::{FileStore, MemoryStore, SignalingServer, Store};

#[derive(Parser)]
#[command(name = "webvoice", version, about = "Run webvoice services, calls and simulated scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    AllowAll,
    DenyAll,
    Prompt,
}

#[derive(Subcommand)]
enum Command {
    /// Run the REST signaling server.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// `memory` or `file:PATH` (NDJSON, survives restarts).
        #[arg(long, default_value = "memory")]
        store: String,
        /// Secret accepted for every address-of-record.
        #[arg(long, default_value = "pw")]
        secret: String,
    },
    /// Run the adaptor daemon on the loopback interface.
    Adaptor {
        #[arg(long, default_value_t = SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), webvoice_adaptor::DEFAULT_PORT))]
        listen: SocketAddr,
        /// Address media sockets bind to and advertise.
        #[arg(long, default_value = "127.0.0.1")]
        media_ip: IpAddr,
        #[arg(long, value_enum, default_value = "prompt")]
        policy: PolicyArg,
        /// Rules file; overrides --policy.
        #[arg(long)]
        policy_file: Option<PathBuf>,
        #[arg(long)]
        token_file: Option<PathBuf>,
        /// Directory served under /widgets/.
        #[arg(long)]
        widgets: Option<PathBuf>,
    },
    /// Run the SIP gateway.
    Gateway {
        #[arg(long)]
        registrar: SocketAddr,
        #[arg(long)]
        public_ip: IpAddr,
        /// Base URL of the signaling server.
        #[arg(long)]
        rest_server: String,
        #[arg(long, default_value_t = DEFAULT_SIP_PORT)]
        port: u16,
        /// Where the REST face (`POST /login/{aor}`) listens.
        #[arg(long, default_value = "127.0.0.1:8090")]
        listen: SocketAddr,
        /// Secret used to log in to the signaling server for SIP users.
        #[arg(long, default_value = "pw")]
        secret: String,
        /// SIP address-of-record to represent on the REST side; repeatable.
        #[arg(long = "sip-user")]
        sip_users: Vec<String>,
        #[arg(long)]
        next_hop: Option<SocketAddr>,
    },
    /// Call FROM to TO between two adaptors and print live media stats.
    Call {
        from: String,
        to: String,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        server: String,
        #[arg(long, default_value = "http://127.0.0.1:9191")]
        adaptor: String,
        /// Adaptor for the callee; defaults to --adaptor.
        #[arg(long)]
        callee_adaptor: Option<String>,
        #[arg(long, default_value = "pw")]
        secret: String,
        #[arg(long, default_value_t = 5)]
        seconds: u64,
        /// Start a server and two adaptors in this process, on loopback.
        #[arg(long)]
        local: bool,
    },
    /// Run a JSON scenario on the simulator and print the report.
    Scenario {
        file: PathBuf,
        /// Overrides the seed in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the recorded trace to this file.
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Scenario { file, seed, dump_trace } => run_scenario(file, seed, dump_trace),
        other => match tokio::runtime::Runtime::new() {
            Ok(rt) => rt.block_on(run_service(other)),
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}

fn run_scenario(file: PathBuf, seed: Option<u64>, dump_trace: Option<PathBuf>) -> i32 {
    let report = match scenario::load(&file) {
        Ok(mut s) => {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            scenario::run(&s, file.parent().unwrap_or(std::path::Path::new(".")))
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(path) = dump_trace {
        let text = serde_json::to_string_pretty(&report.trace).expect("trace serializes");
        if let Err(e) = std::fs::write(&path, text + "\n") {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    }
    println!("{}", report.to_json());
    report.result.exit_code()
}

fn policy(arg: PolicyArg, file: Option<PathBuf>) -> Result<Arc<dyn ApprovalPolicy>, String> {
    if let Some(path) = file {
        return Ok(Arc::new(FilePolicy::load(&path)?));
    }
    Ok(match arg {
        PolicyArg::AllowAll => Arc::new(StaticPolicy::allow_all()),
        PolicyArg::DenyAll => Arc::new(StaticPolicy::deny_all()),
        PolicyArg::Prompt => Arc::new(PromptPolicy::terminal()),
    })
}

fn open_store(spec: &str) -> Result<Arc<dyn Store>, String> {
    match spec.split_once(':') {
        None if spec == "memory" => Ok(Arc::new(MemoryStore::new())),
        Some(("file", path)) => FileStore::open(path)
            .map(|s| Arc::new(s) as Arc<dyn Store>)
            .map_err(|e| format!("{path}: {e}")),
        _ => Err(format!("unknown store {spec:?}; use memory or file:PATH")),
    }
}

async fn run_service(command: Command) -> i32 {
    match service(command).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

async fn service(command: Command) -> Result<i32, String> {
    match command {
        Command::Serve { listen, store, secret } => {
            let server = SignalingServer::builder()
                .store(open_store(&store)?)
                .credentials(Credentials::shared(secret))
                .build()
                .map_err(|e| e.to_string())?;
            let svc = live::start_signaling(listen, Arc::new(server))
                .await
                .map_err(|e| format!("{listen}: {e}"))?;
            eprintln!("signaling server on {}", svc.url());
            wait(svc.task).await;
            Ok(0)
        }
        Command::Adaptor {
            listen,
            media_ip,
            policy: p,
            policy_file,
            token_file,
            widgets,
        } => {
            let config = AdaptorConfig {
                token_file: token_file.map(TokenFile::new),
                ..Default::default()
            };
            let svc = live::start_adaptor(listen, media_ip, config, policy(p, policy_file)?, widgets)
                .await
                .map_err(|e| format!("{listen}: {e}"))?;
            eprintln!("adaptor on {}", svc.service.url());
            tokio::signal::ctrl_c().await.map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Gateway {
            registrar,
            public_ip,
            rest_server,
            port,
            listen,
            secret,
            sip_users,
            next_hop,
        } => {
            let bind = SocketAddr::new(public_ip, port);
            let socket = UdpSipSocket::bind(bind).await.map_err(|e| format!("{bind}: {e}"))?;
            let mut config = GatewayConfig::new(public_ip, registrar, &secret);
            config.sip_users = sip_users;
            config.next_hop = next_hop;
            let gateway = Gateway::start(config, Arc::new(socket), Arc::new(ReqwestClient::new(rest_server)));
            gateway.ready().await;
            let listener = TcpListener::bind(listen).await.map_err(|e| format!("{listen}: {e}"))?;
            eprintln!("gateway: SIP on udp/{bind}, REST on http://{listen}");
            let app = webvoice_gateway::router(gateway.clone());
            tokio::select! {
                r = axum::serve(listener, app) => r.map_err(|e| e.to_string())?,
                _ = tokio::signal::ctrl_c() => {}
            }
            gateway.shutdown();
            Ok(0)
        }
        Command::Call {
            from,
            to,
            server,
            adaptor,
            callee_adaptor,
            secret,
            seconds,
            local,
        } => {
            let mut opts = CallOptions {
                callee_adaptor: callee_adaptor.unwrap_or_else(|| adaptor.clone()),
                from,
                to,
                secret,
                server,
                caller_adaptor: adaptor,
                duration: Duration::from_secs(seconds),
                setup_timeout: Duration::from_secs(10),
            };
            let _stack = if local { Some(local_stack(&mut opts).await?) } else { None };
            Ok(call(&opts).await)
        }
        Command::Scenario { .. } => unreachable!("scenarios run without a service runtime"),
    }
}

async fn wait(task: tokio::task::JoinHandle<()>) {
    tokio::select! {
        _ = task => {}
        _ = tokio::signal::ctrl_c() => {}
    }
}

/// Server plus one adaptor per party, on ephemeral loopback ports.
async fn local_stack(opts: &mut CallOptions) -> Result<Vec<live::AdaptorService>, String> {
    let server = SignalingServer::builder()
        .credentials(Credentials::shared(opts.secret.clone()))
        .build()
        .map_err(|e| e.to_string())?;
    let svc = live::start_signaling(live::loopback(0), Arc::new(server))
        .await
        .map_err(|e| e.to_string())?;
    opts.server = svc.url();
    let mut adaptors = Vec::new();
    for _ in 0..2 {
        let a = live::start_adaptor(
            live::loopback(0),
            IpAddr::V4(Ipv4Addr::LOCALHOST),
            AdaptorConfig::default(),
            Arc::new(StaticPolicy::allow_all()),
            None,
        )
        .await
        .map_err(|e| e.to_string())?;
        adaptors.push(a);
    }
    opts.caller_adaptor = adaptors[0].service.url();
    opts.callee_adaptor = adaptors[1].service.url();
    Ok(adaptors)
}

async fn call(opts: &CallOptions) -> i32 {
    println!("calling {} -> {}", opts.from, opts.to);
    let result = live::run_call(opts, |s| {
        println!(
            "{:>6} ms  sent {:>5}  received {:>5}  played {:>5}  gaps {}",
            s.elapsed_ms, s.caller.packets_sent, s.callee.packets_received, s.callee.frames_played, s.callee.gaps
        );
    })
    .await;
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            0
        }
        Err(e @ CallError::AdaptorDown(_)) => {
            eprintln!("error: {e}");
            eprintln!("hint: the adaptor is a local daemon; start it with `webvoice adaptor` or install it first");
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
