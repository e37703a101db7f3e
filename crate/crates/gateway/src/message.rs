//! SIP message model, parser and serializer.
//!
//! Parsing keeps header names and order as received. Folded header lines are
//! joined with a single space. Serialization always writes a Content-Length
//! that matches the body.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Method {
    Register,
    Invite,
    Ack,
    Bye,
    Cancel,
    Options,
    Other(String),
}

impl Method {
    pub fn parse(token: &str) -> Method {
        match token {
            "REGISTER" => Method::Register,
            "INVITE" => Method::Invite,
            "ACK" => Method::Ack,
            "BYE" => Method::Bye,
            "CANCEL" => Method::Cancel,
            "OPTIONS" => Method::Options,
            other => Method::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Method::Register => "REGISTER",
            Method::Invite => "INVITE",
            Method::Ack => "ACK",
            Method::Bye => "BYE",
            Method::Cancel => "CANCEL",
            Method::Options => "OPTIONS",
            Method::Other(s) => s,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StartLine {
    Request { method: Method, uri: String },
    Response { status: u16, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("message is empty")]
    Empty,
    #[error("no blank line after the headers")]
    NoBlankLine,
    #[error("headers are not valid UTF-8")]
    NotUtf8,
    #[error("malformed start line: {0:?}")]
    StartLine(String),
    #[error("malformed header line: {0:?}")]
    HeaderLine(String),
    #[error("missing mandatory header {0}")]
    MissingHeader(&'static str),
    #[error("malformed CSeq: {0:?}")]
    CSeq(String),
    #[error("malformed Content-Length: {0:?}")]
    ContentLengthValue(String),
    #[error("Content-Length {declared} does not match body length {actual}")]
    ContentLength { declared: usize, actual: usize },
}

/// Compact header forms and their full names.
const COMPACT: [(&str, &str); 8] = [
    ("v", "Via"),
    ("f", "From"),
    ("t", "To"),
    ("i", "Call-ID"),
    ("m", "Contact"),
    ("l", "Content-Length"),
    ("c", "Content-Type"),
    ("e", "Content-Encoding"),
];

fn canonical(name: &str) -> &str {
    COMPACT
        .iter()
        .find(|(short, _)| short.eq_ignore_ascii_case(name))
        .map(|(_, long)| *long)
        .unwrap_or(name)
}

fn same_header(a: &str, b: &str) -> bool {
    canonical(a).eq_ignore_ascii_case(canonical(b))
}

/// Ordered header multimap with case-insensitive lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Headers(Vec<(String, String)>);

impl Headers {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.iter().find(|(n, _)| same_header(n, name)).map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.0.iter().filter(move |(n, _)| same_header(n, name)).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.0.push((name.into(), value.into()));
    }

    /// Replaces the first header called `name`, or appends one.
    pub fn set(&mut self, name: &str, value: impl Into<String>) {
        let value = value.into();
        match self.0.iter_mut().find(|(n, _)| same_header(n, name)) {
            Some(slot) => slot.1 = value,
            None => self.0.push((name.to_string(), value)),
        }
    }

    pub fn remove(&mut self, name: &str) {
        self.0.retain(|(n, _)| !same_header(n, name));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SipMessage {
    pub start: StartLine,
    pub headers: Headers,
    pub body: Vec<u8>,
}

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"-.!%*_+`'~".contains(&b))
}

fn parse_start(line: &str) -> Result<StartLine, ParseError> {
    let bad = || ParseError::StartLine(line.to_string());
    if let Some(rest) = line.strip_prefix("SIP/2.0 ") {
        let (code, reason) = rest.split_once(' ').unwrap_or((rest, ""));
        if code.len() != 3 || !code.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let status: u16 = code.parse().map_err(|_| bad())?;
        if !(100..700).contains(&status) {
            return Err(bad());
        }
        return Ok(StartLine::Response { status, reason: reason.to_string() });
    }
    let mut parts = line.split(' ');
    let (Some(method), Some(uri), Some(version), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(bad());
    };
    if !is_token(method) || version != "SIP/2.0" || !uri.contains(':') {
        return Err(bad());
    }
    Ok(StartLine::Request { method: Method::parse(method), uri: uri.to_string() })
}

fn split_head(bytes: &[u8]) -> Result<(&[u8], &[u8]), ParseError> {
    let crlf = bytes.windows(4).position(|w| w == b"\r\n\r\n").map(|i| (i, i + 4));
    let lf = bytes.windows(2).position(|w| w == b"\n\n").map(|i| (i, i + 2));
    let (end, body) = match (crlf, lf) {
        (Some(a), Some(b)) => if a.0 <= b.0 { a } else { b },
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(ParseError::NoBlankLine),
    };
    Ok((&bytes[..end], &bytes[body..]))
}

impl SipMessage {
    pub fn parse(bytes: &[u8]) -> Result<SipMessage, ParseError> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Err(ParseError::Empty);
        }
        let (head, body) = split_head(bytes)?;
        let head = std::str::from_utf8(head).map_err(|_| ParseError::NotUtf8)?;
        let mut lines = head.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
        let start = parse_start(lines.next().unwrap_or_default())?;

        let mut headers = Headers::default();
        for line in lines {
            if line.starts_with([' ', '\t']) {
                let Some(last) = headers.0.last_mut() else {
                    return Err(ParseError::HeaderLine(line.to_string()));
                };
                let more = line.trim();
                if !more.is_empty() {
                    if !last.1.is_empty() {
                        last.1.push(' ');
                    }
                    last.1.push_str(more);
                }
                continue;
            }
            let (name, value) = line
                .split_once(':')
                .ok_or_else(|| ParseError::HeaderLine(line.to_string()))?;
            let name = name.trim_end_matches([' ', '\t']);
            if !is_token(name) {
                return Err(ParseError::HeaderLine(line.to_string()));
            }
            headers.push(name, value.trim());
        }

        let msg = SipMessage { start, headers, body: body.to_vec() };
        msg.validate()?;
        Ok(msg)
    }

    fn validate(&self) -> Result<(), ParseError> {
        for name in ["Via", "From", "To", "Call-ID", "CSeq"] {
            if self.headers.get(name).is_none() {
                return Err(ParseError::MissingHeader(name));
            }
        }
        if let StartLine::Request { method, .. } = &self.start {
            if matches!(method, Method::Register | Method::Invite) && self.headers.get("Contact").is_none() {
                return Err(ParseError::MissingHeader("Contact"));
            }
            let (_, cseq_method) = self.cseq()?;
            if &cseq_method != method {
                return Err(ParseError::CSeq(self.headers.get("CSeq").unwrap_or_default().to_string()));
            }
        } else {
            self.cseq()?;
        }
        if let Some(raw) = self.headers.get("Content-Length") {
            let declared: usize = raw
                .parse()
                .map_err(|_| ParseError::ContentLengthValue(raw.to_string()))?;
            if declared != self.body.len() {
                return Err(ParseError::ContentLength { declared, actual: self.body.len() });
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = String::new();
        match &self.start {
            StartLine::Request { method, uri } => out.push_str(&format!("{method} {uri} SIP/2.0\r\n")),
            StartLine::Response { status, reason } => out.push_str(&format!("SIP/2.0 {status} {reason}\r\n")),
        }
        let mut wrote_length = false;
        for (name, value) in self.headers.iter() {
            if same_header(name, "Content-Length") {
                if wrote_length {
                    continue;
                }
                wrote_length = true;
                out.push_str(&format!("{name}: {}\r\n", self.body.len()));
            } else {
                out.push_str(&format!("{name}: {value}\r\n"));
            }
        }
        if !wrote_length {
            out.push_str(&format!("Content-Length: {}\r\n", self.body.len()));
        }
        out.push_str("\r\n");
        let mut bytes = out.into_bytes();
        bytes.extend_from_slice(&self.body);
        bytes
    }

    pub fn request(method: Method, uri: impl Into<String>) -> SipMessage {
        SipMessage {
            start: StartLine::Request { method, uri: uri.into() },
            headers: Headers::default(),
            body: Vec::new(),
        }
    }

    /// A response that copies Via, From, To, Call-ID and CSeq from `req`.
    pub fn response_to(req: &SipMessage, status: u16, reason: &str) -> SipMessage {
        let mut headers = Headers::default();
        for via in req.headers.get_all("Via") {
            headers.push("Via", via);
        }
        for name in ["From", "To", "Call-ID", "CSeq"] {
            if let Some(v) = req.headers.get(name) {
                headers.push(name, v);
            }
        }
        SipMessage {
            start: StartLine::Response { status, reason: reason.to_string() },
            headers,
            body: Vec::new(),
        }
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> SipMessage {
        self.headers.push(name, value);
        self
    }

    pub fn with_body(mut self, content_type: &str, body: Vec<u8>) -> SipMessage {
        self.headers.set("Content-Type", content_type);
        self.body = body;
        self
    }

    pub fn method(&self) -> Option<&Method> {
        match &self.start {
            StartLine::Request { method, .. } => Some(method),
            StartLine::Response { .. } => None,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match &self.start {
            StartLine::Response { status, .. } => Some(*status),
            StartLine::Request { .. } => None,
        }
    }

    pub fn uri(&self) -> Option<&str> {
        match &self.start {
            StartLine::Request { uri, .. } => Some(uri),
            StartLine::Response { .. } => None,
        }
    }

    pub fn cseq(&self) -> Result<(u32, Method), ParseError> {
        let raw = self.headers.get("CSeq").ok_or(ParseError::MissingHeader("CSeq"))?;
        let bad = || ParseError::CSeq(raw.to_string());
        let mut parts = raw.split_whitespace();
        let (Some(n), Some(m), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        let n: u32 = n.parse().map_err(|_| bad())?;
        if !is_token(m) {
            return Err(bad());
        }
        Ok((n, Method::parse(m)))
    }

    pub fn call_id(&self) -> &str {
        self.headers.get("Call-ID").unwrap_or_default()
    }

    /// Branch parameter of the topmost Via.
    pub fn branch(&self) -> Option<&str> {
        self.headers.get("Via").and_then(|v| param(v, "branch"))
    }

    pub fn from_tag(&self) -> Option<&str> {
        self.headers.get("From").and_then(|v| param(v, "tag"))
    }

    pub fn to_tag(&self) -> Option<&str> {
        self.headers.get("To").and_then(|v| param(v, "tag"))
    }

    pub fn expires(&self) -> Option<u64> {
        self.headers.get("Expires").and_then(|v| v.trim().parse().ok())
    }
}

/// Value of `;name=value` in a header, outside any `<...>`.
pub fn param<'a>(header: &'a str, name: &str) -> Option<&'a str> {
    let tail = match header.rfind('>') {
        Some(i) => &header[i + 1..],
        None => header,
    };
    tail.split(';').skip(1).find_map(|p| {
        let (k, v) = p.split_once('=').unwrap_or((p, ""));
        k.trim().eq_ignore_ascii_case(name).then(|| v.trim())
    })
}

/// URI of a name-addr or addr-spec header value.
pub fn header_uri(header: &str) -> &str {
    if let (Some(a), Some(b)) = (header.find('<'), header.find('>')) {
        if a < b {
            return &header[a + 1..b];
        }
    }
    header.split(';').next().unwrap_or_default().trim()
}

/// `user@host` part of a SIP URI.
pub fn uri_aor(uri: &str) -> Option<String> {
    let rest = uri.strip_prefix("sips:").or_else(|| uri.strip_prefix("sip:"))?;
    let rest = rest.split([';', '?']).next().unwrap_or_default();
    let (user, host) = rest.split_once('@')?;
    let host = host.split(':').next().unwrap_or_default();
    (!user.is_empty() && !host.is_empty()).then(|| format!("{user}@{host}"))
}
