//! Scripted multi-party scenarios over the simulated world.
//!
//! A script is JSON:
//!
//! ```json
//! { "name": "two-party", "seed": 1,
//!   "network": { "delay_ms": 0, "loss": 0.0, "block_all": false },
//!   "steps": [
//!     { "spawn": { "name": "alice", "aor": "alice@example.net", "ip": "192.0.2.10" } },
//!     { "login": "alice" },
//!     { "call": { "from": "alice", "to": "bob@example.net" } },
//!     { "wait-for-state": { "phone": "bob", "state": "invited" } },
//!     { "assert": { "observable": "state", "phone": "bob", "equals": "invited" } },
//!     { "advance-clock": 1000 } ] }
//! ```
//!
//! The report is deterministic for a given script and seed: it carries
//! only virtual time.

use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use webvoice_adaptor::{ApprovalPolicy, StaticPolicy};
use webvoice_sdk::{CallState, Outcome, PhoneConfig, PhoneSnapshot, SdkError, TraceEntry};

use crate::nat::NatBehavior;
use crate::sim::{LinkConfig, NetCounters};
use crate::world::{sim_runtime, Party, SimWorld};

pub const DEFAULT_STEP_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub secret: Option<String>,
    #[serde(default)]
    pub network: NetworkSpec,
    /// Virtual-time budget for each blocking step.
    #[serde(default)]
    pub step_timeout_ms: Option<u64>,
    #[serde(default)]
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(flatten)]
    pub link: LinkConfig,
    #[serde(default)]
    pub reflector: Option<SocketAddr>,
    #[serde(default)]
    pub nats: Vec<NatSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatSpec {
    pub public_ip: IpAddr,
    /// `EIM/EIF`, `ADM/APDF` and so on.
    pub behavior: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySpec {
    #[default]
    AllowAll,
    DenyAll,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnStep {
    pub name: String,
    pub aor: String,
    pub ip: IpAddr,
    #[serde(default)]
    pub nat: Option<IpAddr>,
    #[serde(default)]
    pub secret: Option<String>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default = "yes")]
    pub accepts_calls: bool,
    #[serde(default)]
    pub auto_answer: bool,
    #[serde(default)]
    pub codecs: Option<Vec<String>>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallStep {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitStep {
    pub phone: String,
    pub state: CallState,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Spawn(SpawnStep),
    Login(String),
    Call(CallStep),
    Accept(String),
    Reject(String),
    Hangup(String),
    WaitForState(WaitStep),
    Assert(Observable),
    AdvanceClock(u64),
}

impl Step {
    pub fn kind(&self) -> &'static str {
        match self {
            Step::Spawn(_) => "spawn",
            Step::Login(_) => "login",
            Step::Call(_) => "call",
            Step::Accept(_) => "accept",
            Step::Reject(_) => "reject",
            Step::Hangup(_) => "hangup",
            Step::WaitForState(_) => "wait-for-state",
            Step::Assert(_) => "assert",
            Step::AdvanceClock(_) => "advance-clock",
        }
    }
}

/// Bounds for a numeric observable. All given bounds must hold.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u64>,
}

impl Bounds {
    fn holds(&self, v: u64) -> bool {
        self.equals.map_or(true, |e| v == e) && self.min.map_or(true, |m| v >= m) && self.max.map_or(true, |m| v <= m)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "observable", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    State {
        phone: String,
        equals: CallState,
    },
    Outcome {
        phone: String,
        equals: Option<Outcome>,
    },
    /// Media counters of a phone (`packets_sent`, `packets_received`,
    /// `frames_played`, `gaps`) or network counters (`net.delivered`, ...).
    Counter {
        #[serde(default)]
        phone: Option<String>,
        name: String,
        #[serde(flatten)]
        bounds: Bounds,
    },
    /// Participants of the conference the phone is in.
    Participants {
        phone: String,
        #[serde(flatten)]
        bounds: Bounds,
    },
    /// Some actor received an event of this type.
    Event {
        actor: String,
        #[serde(rename = "type")]
        kind: String,
        #[serde(default)]
        resource: Option<String>,
    },
    /// The recorded trace equals a golden file, relative to the script.
    Trace {
        golden: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Error => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub step: &'static str,
    pub ok: bool,
    /// Virtual milliseconds since the start when the step finished.
    pub at_ms: u64,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertReport {
    pub index: usize,
    pub observable: &'static str,
    pub subject: String,
    pub expected: Value,
    pub actual: Value,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhoneSummary {
    pub aor: String,
    pub state: CallState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub call_path: Option<String>,
}

impl From<PhoneSnapshot> for PhoneSummary {
    fn from(s: PhoneSnapshot) -> Self {
        Self {
            aor: s.aor,
            state: s.state,
            outcome: s.outcome,
            call_path: s.call_path,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub result: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: Vec<StepReport>,
    pub asserts: Vec<AssertReport>,
    pub phones: BTreeMap<String, PhoneSummary>,
    pub network: NetCounters,
    pub trace: Vec<TraceEntry>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Why a step could not run. Infrastructure problems abort the run with
/// [`Verdict::Error`]; the rest fail it.
enum StepError {
    Infra(String),
    Failed(Value),
}

fn infra(msg: impl Into<String>) -> StepError {
    StepError::Infra(msg.into())
}

fn sdk_failure(e: SdkError) -> StepError {
    StepError::Failed(json!({ "error": e.to_string() }))
}

pub fn load(path: &Path) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Loads and runs a script file. Golden files resolve against its directory.
pub fn run_file(path: &Path) -> Report {
    match load(path) {
        Ok(s) => run(&s, path.parent().unwrap_or(Path::new("."))),
        Err(e) => error_report(path.display().to_string(), 0, e),
    }
}

fn error_report(scenario: String, seed: u64, error: String) -> Report {
    Report {
        scenario,
        seed,
        result: Verdict::Error,
        error: Some(error),
        steps: Vec::new(),
        asserts: Vec::new(),
        phones: BTreeMap::new(),
        network: NetCounters::default(),
        trace: Vec::new(),
    }
}

/// Runs `scenario` on a fresh virtual-time runtime.
pub fn run(scenario: &Scenario, base_dir: &Path) -> Report {
    let runtime = match sim_runtime() {
        Ok(r) => r,
        Err(e) => return error_report(scenario.name.clone(), scenario.seed, e.to_string()),
    };
    runtime.block_on(run_async(scenario, base_dir))
}

struct Runner<'a> {
    world: SimWorld,
    parties: BTreeMap<String, Party>,
    secret: String,
    timeout: u64,
    base_dir: &'a Path,
}

pub async fn run_async(scenario: &Scenario, base_dir: &Path) -> Report {
    let secret = scenario.secret.clone().unwrap_or_else(|| "pw".to_string());
    let world = match build_world(scenario, &secret) {
        Ok(w) => w,
        Err(e) => return error_report(scenario.name.clone(), scenario.seed, e),
    };
    let mut runner = Runner {
        world,
        parties: BTreeMap::new(),
        secret,
        timeout: scenario.step_timeout_ms.unwrap_or(DEFAULT_STEP_TIMEOUT_MS),
        base_dir,
    };
    let mut steps = Vec::new();
    let mut asserts = Vec::new();
    let mut result = Verdict::Pass;
    let mut error = None;
    for (index, step) in scenario.steps.iter().enumerate() {
        let outcome = match step {
            Step::Assert(obs) => {
                let a = runner.check(index, obs).await;
                match a {
                    Ok(a) => {
                        if !a.pass {
                            result = Verdict::Fail;
                        }
                        let detail = json!({ "pass": a.pass });
                        asserts.push(a);
                        Ok(detail)
                    }
                    Err(e) => Err(e),
                }
            }
            other => runner.execute(other).await,
        };
        let at_ms = runner.world.elapsed_ms();
        match outcome {
            Ok(detail) => steps.push(StepReport {
                index,
                step: step.kind(),
                ok: true,
                at_ms,
                detail,
            }),
            Err(StepError::Failed(detail)) => {
                steps.push(StepReport {
                    index,
                    step: step.kind(),
                    ok: false,
                    at_ms,
                    detail,
                });
                result = Verdict::Fail;
                break;
            }
            Err(StepError::Infra(msg)) => {
                steps.push(StepReport {
                    index,
                    step: step.kind(),
                    ok: false,
                    at_ms,
                    detail: json!({ "error": msg }),
                });
                result = Verdict::Error;
                error = Some(msg);
                break;
            }
        }
    }
    runner.world.settle().await;
    Report {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        result,
        error,
        steps,
        asserts,
        phones: runner
            .parties
            .iter()
            .map(|(k, p)| (k.clone(), PhoneSummary::from(p.phone.snapshot())))
            .collect(),
        network: runner.world.net.counters(),
        trace: runner.world.trace.entries(),
    }
}

fn build_world(scenario: &Scenario, secret: &str) -> Result<SimWorld, String> {
    let net = &scenario.network;
    if !(0.0..=1.0).contains(&net.link.loss) {
        return Err(format!("loss must be within 0..=1, got {}", net.link.loss));
    }
    let world = SimWorld::new(scenario.seed, net.link, secret).map_err(|e| e.to_string())?;
    if let Some(r) = net.reflector {
        world.net.set_reflector(r);
    }
    for nat in &net.nats {
        let behavior: NatBehavior = nat.behavior.parse()?;
        world.net.add_nat(nat.public_ip, behavior);
    }
    Ok(world)
}

impl Runner<'_> {
    fn party(&self, name: &str) -> Result<&Party, StepError> {
        self.parties.get(name).ok_or_else(|| infra(format!("no phone named {name:?}")))
    }

    async fn wait_state(&self, name: &str, state: CallState, timeout: u64) -> Result<Value, StepError> {
        let phone = self.party(name)?.phone.clone();
        match self.world.run_until(timeout, || phone.state() == state).await {
            Some(ms) => Ok(json!({ "waited_ms": ms })),
            None => {
                let snap = phone.snapshot();
                Err(StepError::Failed(json!({
                    "timeout_ms": timeout,
                    "expected": state,
                    "actual": snap.state,
                    "outcome": snap.outcome,
                })))
            }
        }
    }

    async fn execute(&mut self, step: &Step) -> Result<Value, StepError> {
        match step {
            Step::Spawn(s) => {
                if self.parties.contains_key(&s.name) {
                    return Err(infra(format!("phone {:?} spawned twice", s.name)));
                }
                if let Some(nat) = s.nat {
                    if self.world.net.nat_counters(nat).is_none() {
                        return Err(infra(format!("no NAT at {nat}")));
                    }
                }
                let mut config = PhoneConfig::new(&s.aor, s.secret.as_deref().unwrap_or(&self.secret));
                config.accepts_calls = s.accepts_calls;
                config.auto_answer = s.auto_answer;
                if let Some(c) = &s.codecs {
                    config.codecs = c.clone();
                }
                let policy: Arc<dyn ApprovalPolicy> = match s.policy {
                    PolicySpec::AllowAll => Arc::new(StaticPolicy::allow_all()),
                    PolicySpec::DenyAll => Arc::new(StaticPolicy::deny_all()),
                };
                let party = self
                    .world
                    .phone(&s.name, config, s.ip, s.nat, policy)
                    .map_err(|e| infra(e.to_string()))?;
                self.parties.insert(s.name.clone(), party);
                Ok(Value::Null)
            }
            Step::Login(name) => {
                let phone = self.party(name)?.phone.clone();
                self.blocking(phone.login()).await?.map_err(sdk_failure)?;
                Ok(json!({ "contact_id": phone.snapshot().contact_id }))
            }
            Step::Call(c) => {
                let phone = self.party(&c.from)?.phone.clone();
                self.blocking(phone.call(&c.to)).await?.map_err(sdk_failure)?;
                let snap = phone.snapshot();
                Ok(json!({ "state": snap.state, "call_path": snap.call_path }))
            }
            Step::Accept(name) => {
                let phone = self.party(name)?.phone.clone();
                let state = self.blocking(phone.accept()).await?.map_err(sdk_failure)?;
                Ok(json!({ "state": state }))
            }
            Step::Reject(name) => {
                let phone = self.party(name)?.phone.clone();
                self.blocking(phone.reject()).await?.map_err(sdk_failure)?;
                Ok(json!({ "state": phone.state() }))
            }
            Step::Hangup(name) => {
                let phone = self.party(name)?.phone.clone();
                self.blocking(phone.hangup()).await?.map_err(sdk_failure)?;
                Ok(json!({ "state": phone.state() }))
            }
            Step::WaitForState(w) => {
                self.wait_state(&w.phone, w.state, w.timeout_ms.unwrap_or(self.timeout))
                    .await
            }
            Step::AdvanceClock(ms) => {
                self.world.run(*ms).await;
                Ok(Value::Null)
            }
            Step::Assert(_) => unreachable!("asserts are checked by the caller"),
        }
    }

    async fn blocking<F: std::future::Future>(&self, fut: F) -> Result<F::Output, StepError> {
        let out = self.world.drive(self.timeout, fut).await;
        out.ok_or_else(|| StepError::Failed(json!({ "timeout_ms": self.timeout })))
    }

    async fn check(&self, index: usize, obs: &Observable) -> Result<AssertReport, StepError> {
        let report = |observable, subject: String, expected: Value, actual: Value, pass| AssertReport {
            index,
            observable,
            subject,
            expected,
            actual,
            pass,
        };
        Ok(match obs {
            Observable::State { phone, equals } => {
                let actual = self.party(phone)?.phone.state();
                report("state", phone.clone(), json!(equals), json!(actual), actual == *equals)
            }
            Observable::Outcome { phone, equals } => {
                let actual = self.party(phone)?.phone.snapshot().outcome;
                let pass = actual == *equals;
                report("outcome", phone.clone(), json!(equals), json!(actual), pass)
            }
            Observable::Counter { phone, name, bounds } => {
                let value = match phone {
                    Some(p) => {
                        let h = self.party(p)?.phone.clone();
                        let stats = self.blocking(h.media_stats()).await?.map_err(sdk_failure)?;
                        match name.as_str() {
                            "packets_sent" => stats.packets_sent,
                            "packets_received" => stats.packets_received,
                            "frames_played" => stats.frames_played,
                            "gaps" => stats.gaps,
                            other => return Err(infra(format!("unknown media counter {other:?}"))),
                        }
                    }
                    None => {
                        let c = self.world.net.counters();
                        match name.as_str() {
                            "net.injected" => c.injected,
                            "net.delivered" => c.delivered,
                            "net.lost" => c.lost,
                            "net.blocked" => c.blocked,
                            "net.filtered" => c.filtered,
                            "net.unroutable" => c.unroutable,
                            other => return Err(infra(format!("unknown network counter {other:?}"))),
                        }
                    }
                };
                let subject = match phone {
                    Some(p) => format!("{p}.{name}"),
                    None => name.clone(),
                };
                report("counter", subject, json!(bounds), json!(value), bounds.holds(value))
            }
            Observable::Participants { phone, bounds } => {
                let snap = self.party(phone)?.phone.snapshot();
                let count = snap
                    .call_path
                    .as_deref()
                    .and_then(|p| p.strip_prefix("/call/"))
                    .and_then(|id| self.world.server.get_call(id).ok())
                    .map(|c| c.participants.len() as u64)
                    .unwrap_or(0);
                report("participants", phone.clone(), json!(bounds), json!(count), bounds.holds(count))
            }
            Observable::Event { actor, kind, resource } => {
                let seen = self.world.trace.entries().into_iter().any(|e| match e {
                    TraceEntry::Event {
                        actor: a,
                        kind: k,
                        resource: r,
                        ..
                    } => a == *actor && k == *kind && resource.as_ref().map_or(true, |want| *want == r),
                    _ => false,
                });
                let expected = json!({ "type": kind, "resource": resource });
                report("event", actor.clone(), expected, json!(seen), seen)
            }
            Observable::Trace { golden } => {
                let path: PathBuf = self.base_dir.join(golden);
                let text = std::fs::read_to_string(&path).map_err(|e| infra(format!("{}: {e}", path.display())))?;
                let want: Vec<TraceEntry> =
                    serde_json::from_str(&text).map_err(|e| infra(format!("{}: {e}", path.display())))?;
                let got = self.world.trace.entries();
                let first_diff = want.iter().zip(&got).position(|(a, b)| a != b).or_else(|| {
                    (want.len() != got.len()).then_some(want.len().min(got.len()))
                });
                let actual = match first_diff {
                    None => json!({ "entries": got.len() }),
                    Some(i) => json!({
                        "entries": got.len(),
                        "first_difference": i,
                        "expected_entry": want.get(i),
                        "actual_entry": got.get(i),
                    }),
                };
                report("trace", golden.clone(), json!({ "entries": want.len() }), actual, first_diff.is_none())
            }
        })
    }
}
