use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApprovalKind {
    AppConnect,
    Bind,
    SendToNewPeer,
    MediaCapture,
    MediaToClient,
}

impl ApprovalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ApprovalKind::AppConnect => "app-connect",
            ApprovalKind::Bind => "bind",
            ApprovalKind::SendToNewPeer => "send-to-new-peer",
            ApprovalKind::MediaCapture => "media-capture",
            ApprovalKind::MediaToClient => "media-to-client",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "app-connect" => ApprovalKind::AppConnect,
            "bind" => ApprovalKind::Bind,
            "send-to-new-peer" => ApprovalKind::SendToNewPeer,
            "media-capture" => ApprovalKind::MediaCapture,
            "media-to-client" => ApprovalKind::MediaToClient,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    AllowOnce,
    AllowAlways,
    Deny,
}

impl Decision {
    pub fn allows(&self) -> bool {
        !matches!(self, Decision::Deny)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "allow-once" | "allow" | "once" => Decision::AllowOnce,
            "allow-always" | "always" => Decision::AllowAlways,
            "deny" => Decision::Deny,
            _ => return None,
        })
    }
}

/// A sensitive operation waiting for the user's decision.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ApprovalRequest {
    pub kind: ApprovalKind,
    pub app_id: String,
    /// What the operation touches: an app id, a peer address, a device.
    pub subject: String,
}

/// Decides approval requests. Called without any adaptor lock held, so
/// implementations may block.
pub trait ApprovalPolicy: Send + Sync {
    fn decide(&self, request: &ApprovalRequest) -> Decision;
}

/// Same answer for everything.
#[derive(Debug, Clone, Copy)]
pub struct StaticPolicy(pub Decision);

impl StaticPolicy {
    pub fn allow_all() -> Self {
        StaticPolicy(Decision::AllowOnce)
    }

    pub fn deny_all() -> Self {
        StaticPolicy(Decision::Deny)
    }
}

impl ApprovalPolicy for StaticPolicy {
    fn decide(&self, _request: &ApprovalRequest) -> Decision {
        self.0
    }
}

type DecideFn = dyn Fn(&ApprovalRequest) -> Decision + Send + Sync;

/// Test policy: answers through a closure and records every request it sees.
pub struct ScriptedPolicy {
    decide: Box<DecideFn>,
    log: Mutex<Vec<ApprovalRequest>>,
}

impl ScriptedPolicy {
    pub fn new(decide: impl Fn(&ApprovalRequest) -> Decision + Send + Sync + 'static) -> Self {
        Self {
            decide: Box::new(decide),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn recorded(&self) -> Vec<ApprovalRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn count(&self, kind: ApprovalKind) -> usize {
        self.log.lock().unwrap().iter().filter(|r| r.kind == kind).count()
    }
}

impl ApprovalPolicy for ScriptedPolicy {
    fn decide(&self, request: &ApprovalRequest) -> Decision {
        self.log.lock().unwrap().push(request.clone());
        (self.decide)(request)
    }
}

/// Asks on the controlling terminal. Anything but `o` or `a` denies.
pub struct PromptPolicy<R, W> {
    io: Mutex<(R, W)>,
}

impl PromptPolicy<std::io::BufReader<std::io::Stdin>, std::io::Stderr> {
    pub fn terminal() -> Self {
        Self::new(std::io::BufReader::new(std::io::stdin()), std::io::stderr())
    }
}

impl<R: BufRead, W: Write> PromptPolicy<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self {
            io: Mutex::new((input, output)),
        }
    }
}

impl<R: BufRead + Send, W: Write + Send> ApprovalPolicy for PromptPolicy<R, W> {
    fn decide(&self, request: &ApprovalRequest) -> Decision {
        let mut guard = self.io.lock().unwrap();
        let (input, output) = &mut *guard;
        let _ = write!(
            output,
            "[adaptor] {} requests {} ({}). Allow [o]nce, [a]lways, [d]eny? ",
            request.app_id,
            request.kind.as_str(),
            request.subject
        );
        let _ = output.flush();
        let mut line = String::new();
        if input.read_line(&mut line).is_err() {
            return Decision::Deny;
        }
        match line.trim() {
            "o" | "once" => Decision::AllowOnce,
            "a" | "always" => Decision::AllowAlways,
            _ => Decision::Deny,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rule {
    kind: Option<ApprovalKind>,
    app: String,
    subject: String,
    decision: Decision,
}

fn glob(pattern: &str, text: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == text,
        Some((head, tail)) => {
            text.len() >= head.len() + tail.len() && text.starts_with(head) && text.ends_with(tail)
        }
    }
}

/// Rule-file policy. One rule per line, first match wins, default deny:
///
/// ```text
/// # kind            app         subject     decision
/// app-connect       *           *           allow-once
/// send-to-new-peer  demo.app    10.*        allow-always
/// ```
#[derive(Debug, Clone, Default)]
pub struct FilePolicy {
    rules: Vec<Rule>,
}

impl FilePolicy {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [kind, app, subject, decision] = fields[..] else {
                return Err(format!("line {}: expected 4 fields", n + 1));
            };
            let kind = match kind {
                "*" => None,
                k => Some(ApprovalKind::parse(k).ok_or_else(|| format!("line {}: unknown kind {k}", n + 1))?),
            };
            let decision =
                Decision::parse(decision).ok_or_else(|| format!("line {}: unknown decision {decision}", n + 1))?;
            rules.push(Rule {
                kind,
                app: app.to_string(),
                subject: subject.to_string(),
                decision,
            });
        }
        Ok(Self { rules })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }
}

impl ApprovalPolicy for FilePolicy {
    fn decide(&self, request: &ApprovalRequest) -> Decision {
        self.rules
            .iter()
            .find(|r| {
                r.kind.is_none_or(|k| k == request.kind)
                    && glob(&r.app, &request.app_id)
                    && glob(&r.subject, &request.subject)
            })
            .map(|r| r.decision)
            .unwrap_or(Decision::Deny)
    }
}
