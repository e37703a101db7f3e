use crate::frame::MediaFrame;
use crate::rtp::RtpPacket;

/// Outgoing RTP stream state for one SSRC.
#[derive(Debug, Clone)]
pub struct RtpStream {
    pub ssrc: u32,
    pub payload_type: u8,
    next_seq: u16,
    timestamp_offset: u32,
    packets: u32,
    octets: u32,
    last_timestamp: u32,
}

impl RtpStream {
    pub fn new(ssrc: u32, payload_type: u8, initial_seq: u16, timestamp_offset: u32) -> Self {
        Self {
            ssrc,
            payload_type,
            next_seq: initial_seq,
            timestamp_offset,
            packets: 0,
            octets: 0,
            last_timestamp: timestamp_offset,
        }
    }

    pub fn packetize(&mut self, frame: &MediaFrame) -> RtpPacket {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        let timestamp = self.timestamp_offset.wrapping_add(frame.timestamp);
        self.packets = self.packets.wrapping_add(1);
        self.octets = self.octets.wrapping_add(frame.data.len() as u32);
        self.last_timestamp = timestamp;
        RtpPacket {
            payload_type: self.payload_type,
            marker: frame.index == 0,
            seq,
            timestamp,
            ssrc: self.ssrc,
            payload: frame.data.clone(),
        }
    }

    pub fn packets_sent(&self) -> u32 {
        self.packets
    }

    pub fn octets_sent(&self) -> u32 {
        self.octets
    }

    pub fn last_timestamp(&self) -> u32 {
        self.last_timestamp
    }
}
