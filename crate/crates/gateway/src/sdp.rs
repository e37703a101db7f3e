//! Minimal SDP: one origin, one connection address, one audio media line.
//!
//! Candidates beyond the connection address travel as `a=candidate` lines so
//! a descriptor survives the trip through SDP. An SDP without them comes
//! from a plain RTP endpoint.

use std::fmt::Write;
use std::net::{IpAddr, SocketAddr};

use thiserror::Error;
use webvoice_core::{SessionDescriptor, TransportCandidate, TransportKind};
use webvoice_media::CodecRegistry;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub username: String,
    pub session_id: u64,
    pub version: u64,
    pub address: IpAddr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Format {
    pub payload_type: u8,
    pub name: String,
    pub clock_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdpBlob {
    pub origin: Origin,
    pub connection: IpAddr,
    pub port: u16,
    pub formats: Vec<Format>,
    pub candidates: Vec<TransportCandidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdpError {
    #[error("SDP is not valid UTF-8")]
    NotUtf8,
    #[error("malformed SDP line {0:?}")]
    Line(String),
    #[error("SDP lacks {0}")]
    Missing(&'static str),
    #[error("no codec in common")]
    NoCommonCodec,
    #[error("descriptor has no UDP candidate")]
    NoCandidate,
}

fn addr_line(addr: IpAddr) -> String {
    match addr {
        IpAddr::V4(a) => format!("IN IP4 {a}"),
        IpAddr::V6(a) => format!("IN IP6 {a}"),
    }
}

fn parse_addr(value: &str, line: &str) -> Result<IpAddr, SdpError> {
    let mut parts = value.split_whitespace();
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("IN"), Some("IP4" | "IP6"), Some(a), None) => a.parse().map_err(|_| SdpError::Line(line.into())),
        _ => Err(SdpError::Line(line.into())),
    }
}

impl SdpBlob {
    pub fn to_text(&self) -> String {
        let o = &self.origin;
        let mut s = String::new();
        let _ = write!(s, "v=0\r\n");
        let _ = write!(s, "o={} {} {} {}\r\n", o.username, o.session_id, o.version, addr_line(o.address));
        let _ = write!(s, "s=webvoice\r\n");
        let _ = write!(s, "c={}\r\n", addr_line(self.connection));
        let _ = write!(s, "t=0 0\r\n");
        let pts: Vec<String> = self.formats.iter().map(|f| f.payload_type.to_string()).collect();
        let _ = write!(s, "m=audio {} RTP/AVP {}\r\n", self.port, pts.join(" "));
        for f in &self.formats {
            let _ = write!(s, "a=rtpmap:{} {}/{}\r\n", f.payload_type, f.name, f.clock_rate);
        }
        for (i, c) in self.candidates.iter().enumerate() {
            let _ = write!(
                s,
                "a=candidate:{} 1 {} {} {} {} typ host\r\n",
                i + 1,
                c.kind.as_str().to_ascii_uppercase(),
                c.priority,
                c.address,
                c.port
            );
        }
        s
    }

    pub fn parse(bytes: &[u8]) -> Result<SdpBlob, SdpError> {
        let text = std::str::from_utf8(bytes).map_err(|_| SdpError::NotUtf8)?;
        let mut origin = None;
        let mut connection = None;
        let mut media: Option<(u16, Vec<u8>)> = None;
        let mut rtpmap: Vec<Format> = Vec::new();
        let mut candidates = Vec::new();
        for line in text.lines().map(str::trim_end).filter(|l| !l.is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| SdpError::Line(line.into()))?;
            match key {
                "o" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 6 {
                        return Err(SdpError::Line(line.into()));
                    }
                    let bad = || SdpError::Line(line.to_string());
                    origin = Some(Origin {
                        username: f[0].to_string(),
                        session_id: f[1].parse().map_err(|_| bad())?,
                        version: f[2].parse().map_err(|_| bad())?,
                        address: parse_addr(&f[3..].join(" "), line)?,
                    });
                }
                "c" => connection = Some(parse_addr(value, line)?),
                "m" if media.is_none() => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() < 3 || f[0] != "audio" {
                        return Err(SdpError::Line(line.into()));
                    }
                    let port = f[1].parse().map_err(|_| SdpError::Line(line.into()))?;
                    let pts = f[3..]
                        .iter()
                        .map(|p| p.parse::<u8>().map_err(|_| SdpError::Line(line.into())))
                        .collect::<Result<_, _>>()?;
                    media = Some((port, pts));
                }
                "a" => {
                    if let Some(map) = value.strip_prefix("rtpmap:") {
                        let bad = || SdpError::Line(line.to_string());
                        let (pt, enc) = map.split_once(' ').ok_or_else(bad)?;
                        let (name, rate) = enc.split_once('/').ok_or_else(bad)?;
                        let rate = rate.split('/').next().unwrap_or_default();
                        rtpmap.push(Format {
                            payload_type: pt.parse().map_err(|_| bad())?,
                            name: name.to_string(),
                            clock_rate: rate.parse().map_err(|_| bad())?,
                        });
                    } else if let Some(cand) = value.strip_prefix("candidate:") {
                        candidates.push(parse_candidate(cand).ok_or_else(|| SdpError::Line(line.into()))?);
                    }
                }
                _ => {}
            }
        }
        let origin = origin.ok_or(SdpError::Missing("an origin line"))?;
        let connection = connection.ok_or(SdpError::Missing("a connection line"))?;
        let (port, pts) = media.ok_or(SdpError::Missing("an audio media line"))?;
        let formats = pts
            .into_iter()
            .map(|pt| {
                rtpmap.iter().find(|f| f.payload_type == pt).cloned().unwrap_or(Format {
                    payload_type: pt,
                    name: String::new(),
                    clock_rate: 0,
                })
            })
            .collect();
        Ok(SdpBlob { origin, connection, port, formats, candidates })
    }

    /// SDP describing `desc`. Codecs unknown to `registry` are left out.
    pub fn from_descriptor(
        desc: &SessionDescriptor,
        registry: &CodecRegistry,
        session_id: u64,
        version: u64,
    ) -> Result<SdpBlob, SdpError> {
        let best = desc
            .candidates
            .iter()
            .filter(|c| c.kind == TransportKind::Udp)
            .max_by_key(|c| c.priority)
            .ok_or(SdpError::NoCandidate)?;
        let mut formats: Vec<Format> = Vec::new();
        for name in desc.codecs_preferred.iter().chain(&desc.codecs_supported) {
            if let Some(codec) = registry.by_name(name) {
                if !formats.iter().any(|f| f.payload_type == codec.payload_type) {
                    formats.push(Format {
                        payload_type: codec.payload_type,
                        name: codec.name.clone(),
                        clock_rate: codec.clock_rate,
                    });
                }
            }
        }
        if formats.is_empty() {
            return Err(SdpError::NoCommonCodec);
        }
        Ok(SdpBlob {
            origin: Origin { username: "-".into(), session_id, version, address: best.address },
            connection: best.address,
            port: best.port,
            formats,
            candidates: desc.candidates.clone(),
        })
    }

    /// Descriptor for the far end. Without candidate lines the endpoint is
    /// plain RTP at the connection address.
    pub fn to_descriptor(&self, registry: &CodecRegistry) -> Result<SessionDescriptor, SdpError> {
        let mut codecs: Vec<String> = Vec::new();
        for f in &self.formats {
            let known = if f.name.is_empty() {
                registry.by_payload_type(f.payload_type)
            } else {
                registry.by_name(&f.name).filter(|c| f.clock_rate == 0 || c.clock_rate == f.clock_rate)
            };
            if let Some(c) = known {
                if !codecs.contains(&c.name) {
                    codecs.push(c.name.clone());
                }
            }
        }
        if codecs.is_empty() {
            return Err(SdpError::NoCommonCodec);
        }
        let plain = self.candidates.is_empty();
        let candidates = if plain {
            vec![TransportCandidate::udp(SocketAddr::new(self.connection, self.port), 1)]
        } else {
            self.candidates.clone()
        };
        Ok(SessionDescriptor {
            candidates,
            codecs_supported: codecs.clone(),
            codecs_preferred: codecs,
            media_stream_url: plain.then(|| format!("rtp://{}", SocketAddr::new(self.connection, self.port))),
        })
    }
}

fn parse_candidate(value: &str) -> Option<TransportCandidate> {
    let f: Vec<&str> = value.split_whitespace().collect();
    if f.len() < 6 {
        return None;
    }
    let kind = match f[2].to_ascii_lowercase().as_str() {
        "udp" => TransportKind::Udp,
        "tcp" => TransportKind::Tcp,
        _ => return None,
    };
    Some(TransportCandidate {
        kind,
        priority: f[3].parse().ok()?,
        address: f[4].parse().ok()?,
        port: f[5].parse().ok()?,
    })
}
