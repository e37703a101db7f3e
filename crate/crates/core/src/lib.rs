//! Domain types shared by every webvoice component: transport candidates,
//! JSON session descriptors, sequenced event frames and the injectable clock.

pub mod candidate;
pub mod clock;
pub mod error;
pub mod event;
pub mod ndjson;
pub mod session;

pub use candidate::{validate_candidates, CandidateError, TransportCandidate, TransportKind};
pub use clock::{Clock, MockClock, SharedClock, SystemClock};
pub use error::ErrorBody;
pub use event::{EventChannel, EventFrame, EventReceiver, EventSender, SendError};
pub use ndjson::NdjsonDecoder;
pub use session::{SessionDescriptor, SessionError};
