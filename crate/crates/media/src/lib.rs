//! Media plumbing for the adaptor: RTP/RTCP wire formats, the pseudo-codec
//! registry, synthetic capture sources and measuring sinks.

pub mod codec;
pub mod frame;
pub mod negotiate;
pub mod packetizer;
pub mod rtcp;
pub mod rtp;
pub mod sink;
pub mod source;

pub use codec::{CodecDescriptor, CodecRegistry};
pub use frame::{FrameClock, MediaFrame, MediaKind};
pub use negotiate::negotiate_codecs;
pub use packetizer::RtpStream;
pub use rtcp::SenderReport;
pub use rtp::{RtpError, RtpPacket, RTP_HEADER_LEN};
pub use sink::{SinkStats, StatsSink};
pub use source::{MediaSource, PatternSource, SourceError, ToneSource};
