use serde::{Deserialize, Serialize};

/// Audio frames are always 20 ms of 8 kHz mono.
pub const AUDIO_FRAME_MS: u64 = 20;
pub const AUDIO_SAMPLE_RATE: u32 = 8000;
pub const SAMPLES_PER_FRAME: usize = 160;
pub const VIDEO_CLOCK_RATE: u32 = 90_000;
/// Synthetic video frames start with this many header bytes.
pub const PATTERN_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Audio,
    Video,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaFrame {
    pub kind: MediaKind,
    /// Position on the media clock, in clock-rate ticks.
    pub timestamp: u32,
    /// Sample rate for audio, frames per second for video.
    pub rate: u32,
    pub index: u64,
    pub data: Vec<u8>,
}

/// Counts how many frames a source owes since it was started, so a pipeline
/// ticked irregularly still emits exactly one frame per interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameClock {
    start_ms: u64,
    interval_ms: u64,
    emitted: u64,
}

impl FrameClock {
    pub fn new(start_ms: u64, interval_ms: u64) -> Self {
        Self {
            start_ms,
            interval_ms: interval_ms.max(1),
            emitted: 0,
        }
    }

    /// Number of frames to emit now; the counter is advanced accordingly.
    pub fn take_due(&mut self, now_ms: u64) -> u64 {
        let total = now_ms.saturating_sub(self.start_ms) / self.interval_ms;
        let due = total.saturating_sub(self.emitted);
        self.emitted += due;
        due
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }
}
