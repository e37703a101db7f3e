//! Scripted SIP endpoints (registrar, remote phone) on the in-memory network.

use std::net::SocketAddr;
use std::time::Duration;

use webvoice_gateway::{MemSipNet, MemSipSocket, Method, SipMessage, SipSocket};

pub const PLAIN_SDP: &str = "v=0\r\no=peer 7 7 IN IP4 198.51.100.4\r\ns=-\r\nc=IN IP4 198.51.100.4\r\nt=0 0\r\n\
    m=audio 30000 RTP/AVP 0 97\r\na=rtpmap:0 PCMU/8000\r\na=rtpmap:97 tone/8000\r\n";
pub const PCMU_ONLY_SDP: &str = "v=0\r\no=peer 7 7 IN IP4 198.51.100.4\r\ns=-\r\nc=IN IP4 198.51.100.4\r\nt=0 0\r\n\
    m=audio 30000 RTP/AVP 0\r\na=rtpmap:0 PCMU/8000\r\n";

pub struct Peer {
    pub socket: MemSipSocket,
    /// Every message received, with the tokio time it arrived at.
    pub seen: std::sync::Mutex<Vec<(tokio::time::Instant, SipMessage)>>,
}

impl Peer {
    pub fn new(net: &MemSipNet, addr: &str) -> Self {
        Self { socket: net.bind(addr.parse().unwrap()), seen: Default::default() }
    }

    pub fn addr(&self) -> SocketAddr {
        self.socket.local_addr()
    }

    pub async fn recv(&self, within_ms: u64) -> Option<(SipMessage, SocketAddr)> {
        let (data, from) = tokio::time::timeout(Duration::from_millis(within_ms), self.socket.recv_from())
            .await
            .ok()?
            .ok()?;
        let msg = SipMessage::parse(&data).expect("gateway sends well-formed SIP");
        self.seen.lock().unwrap().push((tokio::time::Instant::now(), msg.clone()));
        Some((msg, from))
    }

    /// Next request with `method`, skipping anything else.
    pub async fn expect(&self, method: Method, within_ms: u64) -> (SipMessage, SocketAddr) {
        let deadline = tokio::time::Instant::now() + Duration::from_millis(within_ms);
        loop {
            let left = deadline.saturating_duration_since(tokio::time::Instant::now()).as_millis() as u64;
            let (msg, from) = self.recv(left).await.unwrap_or_else(|| panic!("no {method} within {within_ms} ms"));
            if msg.method() == Some(&method) {
                return (msg, from);
            }
        }
    }

    /// Next response with `status`, skipping anything else.
    pub async fn expect_status(&self, status: u16, within_ms: u64) -> SipMessage {
        let deadline = tokio::time::Instant::now() + Duration::from_millis(within_ms);
        loop {
            let left = deadline.saturating_duration_since(tokio::time::Instant::now()).as_millis() as u64;
            let (msg, _) = self.recv(left).await.unwrap_or_else(|| panic!("no {status} within {within_ms} ms"));
            if msg.status() == Some(status) {
                return msg;
            }
        }
    }

    pub async fn send(&self, msg: &SipMessage, to: SocketAddr) {
        self.socket.send_to(&msg.serialize(), to).await.unwrap();
    }

    pub async fn reply(&self, req: &SipMessage, to: SocketAddr, status: u16, reason: &str, sdp: Option<&str>) {
        let mut resp = SipMessage::response_to(req, status, reason);
        if status > 100 {
            let to_header = resp.headers.get("To").unwrap().to_string();
            if !to_header.contains("tag=") {
                resp.headers.set("To", format!("{to_header};tag=peer1"));
            }
            resp.headers.push("Contact", format!("<sip:peer@{}>", self.addr()));
        }
        if let Some(sdp) = sdp {
            resp = resp.with_body("application/sdp", sdp.as_bytes().to_vec());
        }
        self.send(&resp, to).await;
    }

    /// Messages seen so far whose CSeq method is `method` (requests only).
    pub fn requests(&self, method: Method) -> usize {
        self.seen.lock().unwrap().iter().filter(|(_, m)| m.method() == Some(&method)).count()
    }
}

/// A request from the peer inside the dialog of `ok` (a 2xx it sent or received).
pub fn in_dialog(method: Method, uri: &str, from: &str, to: &str, call_id: &str, cseq: u32, via_host: SocketAddr) -> SipMessage {
    SipMessage::request(method.clone(), uri)
        .with_header("Via", format!("SIP/2.0/UDP {via_host};branch=z9hG4bKpeer{cseq}{method}"))
        .with_header("Max-Forwards", "70")
        .with_header("From", from)
        .with_header("To", to)
        .with_header("Call-ID", call_id)
        .with_header("CSeq", format!("{cseq} {method}"))
}

impl Peer {
    pub async fn socket_send_raw(&self, data: &[u8], to: &str) {
        self.socket.send_to(data, to.parse().unwrap()).await.unwrap();
    }
}
