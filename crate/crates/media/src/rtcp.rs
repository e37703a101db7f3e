use crate::rtp::RtpError;

pub const RTCP_SR: u8 = 200;
pub const SENDER_REPORT_LEN: usize = 28;

/// Seconds between the NTP epoch (1900) and the Unix epoch.
const NTP_UNIX_OFFSET: u64 = 2_208_988_800;

/// Minimal RTCP sender report without reception report blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SenderReport {
    pub ssrc: u32,
    pub ntp_secs: u32,
    pub ntp_frac: u32,
    pub rtp_timestamp: u32,
    pub packet_count: u32,
    pub octet_count: u32,
}

impl SenderReport {
    pub fn new(ssrc: u32, unix_ms: u64, rtp_timestamp: u32, packets: u32, octets: u32) -> Self {
        let secs = unix_ms / 1000 + NTP_UNIX_OFFSET;
        let frac = ((unix_ms % 1000) << 32) / 1000;
        Self {
            ssrc,
            ntp_secs: secs as u32,
            ntp_frac: frac as u32,
            rtp_timestamp,
            packet_count: packets,
            octet_count: octets,
        }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SENDER_REPORT_LEN);
        out.push(0x80);
        out.push(RTCP_SR);
        // length in 32-bit words minus one
        out.extend_from_slice(&((SENDER_REPORT_LEN / 4 - 1) as u16).to_be_bytes());
        for word in [
            self.ssrc,
            self.ntp_secs,
            self.ntp_frac,
            self.rtp_timestamp,
            self.packet_count,
            self.octet_count,
        ] {
            out.extend_from_slice(&word.to_be_bytes());
        }
        out
    }

    pub fn parse(buf: &[u8]) -> Result<Self, RtpError> {
        if buf.len() < SENDER_REPORT_LEN {
            return Err(RtpError::TooShort(buf.len()));
        }
        if buf[0] >> 6 != 2 {
            return Err(RtpError::BadVersion(buf[0] >> 6));
        }
        if buf[1] != RTCP_SR {
            return Err(RtpError::UnsupportedHeader);
        }
        let word = |i: usize| u32::from_be_bytes([buf[i], buf[i + 1], buf[i + 2], buf[i + 3]]);
        Ok(Self {
            ssrc: word(4),
            ntp_secs: word(8),
            ntp_frac: word(12),
            rtp_timestamp: word(16),
            packet_count: word(20),
            octet_count: word(24),
        })
    }

    pub fn is_rtcp(buf: &[u8]) -> bool {
        buf.len() >= 8 && buf[0] >> 6 == 2 && (200..=204).contains(&buf[1])
    }
}
