//! Client SDK for webvoice.
//!
//! [`SignalingClient`] and [`AdaptorClient`] wrap the two REST APIs over any
//! [`HttpLike`] transport. [`Softphone`] runs the call flow on top of them:
//! register, invite, join the conference, exchange session descriptors,
//! run connectivity checks through the adaptor and wire the media path.

pub mod adaptor;
pub mod click;
pub mod error;
pub mod http;
pub mod phone;
pub mod roster;
pub mod signaling;
pub mod state;

pub use adaptor::{AdaptorClient, Grant};
pub use click::{parse_target, ClickToCall, HISTORY_LEN};
pub use error::SdkError;
pub use http::{ApiRequest, ApiResponse, EventStream, HttpLike, Recorder, ReqwestClient, RouterClient, TraceEntry, TraceLog};
pub use phone::{MediaStats, PhoneConfig, PhoneEvent, PhoneHandle, PhoneSnapshot, Softphone};
pub use roster::{Presence, RosterModel};
pub use signaling::{Conference, Contact, LoginPage, Participant, Registration, SignalingClient};
pub use state::{CallState, CallStateMachine, IllegalTransition, Outcome, Transition};
