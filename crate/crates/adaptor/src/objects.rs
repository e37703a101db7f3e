use std::collections::{BTreeSet, VecDeque};
use std::net::SocketAddr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use webvoice_media::{FrameClock, MediaFrame, MediaKind, MediaSource, PatternSource, RtpStream, SenderReport, StatsSink, ToneSource};

use crate::ice::IceAgent;
use crate::net::TcpConnection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    UdpTransport,
    TcpTransport,
    IceTransport,
    RtpTransport,
    Microphone,
    Speaker,
    Camera,
    Display,
}

impl ObjectClass {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "UdpTransport" => ObjectClass::UdpTransport,
            "TcpTransport" => ObjectClass::TcpTransport,
            "IceTransport" => ObjectClass::IceTransport,
            "RtpTransport" => ObjectClass::RtpTransport,
            "Microphone" => ObjectClass::Microphone,
            "Speaker" => ObjectClass::Speaker,
            "Camera" => ObjectClass::Camera,
            "Display" => ObjectClass::Display,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::UdpTransport => "UdpTransport",
            ObjectClass::TcpTransport => "TcpTransport",
            ObjectClass::IceTransport => "IceTransport",
            ObjectClass::RtpTransport => "RtpTransport",
            ObjectClass::Microphone => "Microphone",
            ObjectClass::Speaker => "Speaker",
            ObjectClass::Camera => "Camera",
            ObjectClass::Display => "Display",
        }
    }
}

/// Datagrams kept for `recv-poll`.
pub const INBOX_LIMIT: usize = 256;

#[derive(Debug, Default)]
pub struct UdpState {
    pub port: u16,
    pub bytes_in: u64,
    pub bytes_out: u64,
    pub packets_in: u64,
    pub packets_out: u64,
    pub peers: BTreeSet<SocketAddr>,
    pub inbox: VecDeque<(SocketAddr, Vec<u8>)>,
}

pub struct TcpState {
    pub remote: SocketAddr,
    pub secure: bool,
    pub conn: Box<dyn TcpConnection>,
    pub bytes_out: u64,
}

pub struct IceState {
    pub agent: IceAgent,
    pub components: Vec<String>,
}

#[derive(Debug)]
pub struct RtpState {
    pub rtp: String,
    pub rtcp: String,
    pub rtp_port: u16,
    pub rtcp_port: u16,
    pub ssrc: u32,
    pub initial_seq: u16,
    pub timestamp_offset: u32,
    pub remote: Option<SocketAddr>,
    pub stream: Option<RtpStream>,
    pub next_rtcp: u64,
    pub packets_in: u64,
    pub bytes_in: u64,
    pub reports_sent: u64,
    pub last_report: Option<SenderReport>,
}

#[derive(Debug)]
pub enum Generator {
    Tone { source: ToneSource, frequency: f64 },
    Pattern { source: PatternSource, fps: u32 },
}

impl Generator {
    pub fn source(&mut self) -> &mut dyn MediaSource {
        match self {
            Generator::Tone { source, .. } => source,
            Generator::Pattern { source, .. } => source,
        }
    }

    pub fn kind(&self) -> MediaKind {
        match self {
            Generator::Tone { .. } => MediaKind::Audio,
            Generator::Pattern { .. } => MediaKind::Video,
        }
    }
}

#[derive(Debug)]
pub struct SourceState {
    pub generator: Generator,
    pub codec: String,
    pub clock: FrameClock,
    pub running: bool,
    pub frames: u64,
}

impl SourceState {
    pub fn next_frame(&mut self) -> MediaFrame {
        self.frames += 1;
        self.generator.source().next_frame()
    }
}

#[derive(Debug)]
pub struct SinkState {
    pub kind: MediaKind,
    pub sink: Arc<StatsSink>,
}

pub enum State {
    Udp(UdpState),
    Tcp(TcpState),
    Ice(IceState),
    Rtp(RtpState),
    Source(SourceState),
    Sink(SinkState),
}

pub struct Object {
    pub id: String,
    pub class: ObjectClass,
    pub token: String,
    /// Composite that owns this object (an RTP pair member or ICE component).
    pub parent: Option<String>,
    pub state: State,
}

impl Object {
    pub fn describe(&self) -> Value {
        let state = match &self.state {
            State::Udp(u) => json!({
                "local_port": u.port,
                "bytes_in": u.bytes_in,
                "bytes_out": u.bytes_out,
                "packets_in": u.packets_in,
                "packets_out": u.packets_out,
                "peer_allowlist": u.peers,
            }),
            State::Tcp(t) => json!({
                "remote": t.remote,
                "secure": t.secure,
                "local": t.conn.local_addr().ok(),
                "bytes_out": t.bytes_out,
            }),
            State::Ice(i) => {
                let mut v = i.agent.describe();
                v["components"] = json!(i.components);
                v
            }
            State::Rtp(r) => json!({
                "rtp_transport": r.rtp,
                "rtcp_transport": r.rtcp,
                "rtp_port": r.rtp_port,
                "rtcp_port": r.rtcp_port,
                "ssrc": r.ssrc,
                "remote": r.remote,
                "packets_sent": r.stream.as_ref().map_or(0, |s| s.packets_sent()),
                "octets_sent": r.stream.as_ref().map_or(0, |s| s.octets_sent()),
                "packets_received": r.packets_in,
                "octets_received": r.bytes_in,
                "reports_sent": r.reports_sent,
                "last_sender_report": r.last_report.as_ref().map(|sr| json!({
                    "ssrc": sr.ssrc,
                    "packets": sr.packet_count,
                    "octets": sr.octet_count,
                })),
            }),
            State::Source(s) => {
                let mut v = json!({
                    "kind": s.generator.kind(),
                    "codec": s.codec,
                    "running": s.running,
                    "frames": s.frames,
                });
                match &s.generator {
                    Generator::Tone { source, frequency } => {
                        v["frequency"] = json!(frequency);
                        v["volume"] = json!(source.amplitude());
                    }
                    Generator::Pattern { fps, .. } => v["fps"] = json!(fps),
                }
                v
            }
            State::Sink(s) => json!({ "kind": s.kind, "stats": s.sink.snapshot() }),
        };
        json!({
            "object_id": self.id,
            "class": self.class,
            "parent": self.parent,
            "state": state,
        })
    }

    pub fn media_out(&self) -> Option<MediaKind> {
        match &self.state {
            State::Source(s) => Some(s.generator.kind()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "type", content = "id")]
pub enum SinkRef {
    Object(String),
    Client,
}

#[derive(Debug, Clone, Serialize)]
pub struct Pipeline {
    pub id: String,
    #[serde(skip)]
    pub token: String,
    pub source: String,
    pub sink: SinkRef,
}
