//! RESTful signaling server.
//!
//! Two resource trees: `/login/{aor}` (the registry of online users and their
//! contacts) and `/call/{id}` (conferences and their participants). Any
//! resource can be watched with `?command=subscribe`, which holds the response
//! open and streams NDJSON [`EventFrame`](webvoice_core::EventFrame)s;
//! `?command=notify` pushes an application event (invitation, cancellation)
//! to everyone subscribed to a login resource.

pub mod auth;
pub mod config;
pub mod error;
pub mod http;
pub mod ids;
pub mod model;
pub mod server;
pub mod store;

pub use config::ServerConfig;
pub use error::SignalError;
pub use http::router;
pub use ids::{IdGenerator, SequentialIds};
pub use model::{
    ConferenceResource, ContactRecord, EventKind, LoginPage, ParticipantEntry, RegisterRequest,
    Registered,
};
pub use server::{ReapReport, SignalingServer, Snapshot};
pub use store::{FileStore, MemoryStore, Store, StoreRecord};
