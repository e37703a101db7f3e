//! REST to SIP gateway.
//!
//! Speaks a small SIP subset over UDP (REGISTER, INVITE, ACK, BYE, CANCEL)
//! and maps it onto the REST signaling API: registration of a REST user,
//! calls from REST users to SIP users and calls from SIP users to REST users.

pub mod dialog;
pub mod gateway;
pub mod http;
pub mod message;
pub mod sdp;
pub mod socket;
pub mod transaction;

pub use dialog::{DialogError, DialogPhase, DialogState};
pub use gateway::{Binding, Gateway, GatewayConfig, GatewayError, SipLogEntry};
pub use http::router;
pub use message::{Headers, Method, ParseError, SipMessage, StartLine};
pub use sdp::{SdpBlob, SdpError};
pub use socket::{MemSipNet, MemSipSocket, SipSocket, UdpSipSocket};
pub use transaction::{TransactionError, RETRANSMIT_MS, TIMEOUT_MS};

/// Default SIP port.
pub const DEFAULT_SIP_PORT: u16 = 5060;
