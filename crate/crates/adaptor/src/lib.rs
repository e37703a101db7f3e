//! Host-resident adaptor daemon.
//!
//! Web applications authenticate over a loopback HTTP API and receive a
//! time-bound token. Under that token they create transport objects (UDP,
//! TCP, ICE, RTP) and synthetic media devices (microphone, camera, speaker,
//! display), invoke methods on them and wire them into media pipelines.
//! Sensitive operations go through an [`ApprovalPolicy`].

pub mod adaptor;
pub mod approval;
pub mod error;
pub mod http;
pub mod ice;
pub mod net;
pub mod objects;
pub mod token;

pub use adaptor::{Adaptor, AdaptorConfig, AuthGrant};
pub use approval::{
    ApprovalKind, ApprovalPolicy, ApprovalRequest, Decision, FilePolicy, PromptPolicy, ScriptedPolicy, StaticPolicy,
};
pub use error::AdaptorError;
pub use http::{inline_router, router, NDJSON};
pub use ice::{IceConfig, IcePhase};
pub use net::{BindError, DatagramSink, NetworkBackend, TcpConnection, UdpBackend};
pub use objects::ObjectClass;
pub use token::TokenFile;

/// Default loopback port of the adaptor API.
pub const DEFAULT_PORT: u16 = 9191;
