use std::f64::consts::PI;

use thiserror::Error;

use crate::frame::{
    MediaFrame, MediaKind, AUDIO_FRAME_MS, AUDIO_SAMPLE_RATE, PATTERN_HEADER_LEN,
    SAMPLES_PER_FRAME, VIDEO_CLOCK_RATE,
};

pub const MIN_TONE_HZ: f64 = 20.0;
pub const MAX_TONE_HZ: f64 = 3400.0;
pub const DEFAULT_AMPLITUDE: i16 = 8000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("tone frequency {0} Hz outside 20..=3400")]
    FrequencyOutOfBand(f64),
    #[error("frame rate {0} outside 1..=60")]
    BadFrameRate(u32),
}

/// A pull-driven synthetic capture device.
pub trait MediaSource: Send {
    fn kind(&self) -> MediaKind;
    fn codec(&self) -> &'static str;
    fn frame_interval_ms(&self) -> u64;
    fn next_frame(&mut self) -> MediaFrame;
}

/// Sine generator standing in for a microphone: 50 frames/s of 20 ms,
/// 8 kHz, 16-bit little-endian mono samples with continuous phase.
#[derive(Debug, Clone)]
pub struct ToneSource {
    freq: f64,
    amplitude: i16,
    index: u64,
}

impl ToneSource {
    pub fn new(freq: f64) -> Result<Self, SourceError> {
        Self::with_amplitude(freq, DEFAULT_AMPLITUDE)
    }

    pub fn with_amplitude(freq: f64, amplitude: i16) -> Result<Self, SourceError> {
        if !(MIN_TONE_HZ..=MAX_TONE_HZ).contains(&freq) {
            return Err(SourceError::FrequencyOutOfBand(freq));
        }
        Ok(Self {
            freq,
            amplitude,
            index: 0,
        })
    }

    pub fn amplitude(&self) -> i16 {
        self.amplitude
    }

    pub fn set_amplitude(&mut self, amplitude: i16) {
        self.amplitude = amplitude;
    }

    /// Decodes a frame payload back into samples.
    pub fn samples(data: &[u8]) -> Vec<i16> {
        data.chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect()
    }
}

impl MediaSource for ToneSource {
    fn kind(&self) -> MediaKind {
        MediaKind::Audio
    }

    fn codec(&self) -> &'static str {
        "tone"
    }

    fn frame_interval_ms(&self) -> u64 {
        AUDIO_FRAME_MS
    }

    fn next_frame(&mut self) -> MediaFrame {
        let first = self.index * SAMPLES_PER_FRAME as u64;
        let w = 2.0 * PI * self.freq / AUDIO_SAMPLE_RATE as f64;
        let mut data = Vec::with_capacity(SAMPLES_PER_FRAME * 2);
        for n in 0..SAMPLES_PER_FRAME as u64 {
            let s = (self.amplitude as f64 * (w * (first + n) as f64).sin()).round() as i16;
            data.extend_from_slice(&s.to_le_bytes());
        }
        let frame = MediaFrame {
            kind: MediaKind::Audio,
            timestamp: first as u32,
            rate: AUDIO_SAMPLE_RATE,
            index: self.index,
            data,
        };
        self.index += 1;
        frame
    }
}

/// Test-pattern generator standing in for a camera. Each frame starts with a
/// 16-byte header: `b"PATN"`, the frame index (u64 BE), the frame rate (u32 BE).
#[derive(Debug, Clone)]
pub struct PatternSource {
    fps: u32,
    index: u64,
    body_len: usize,
}

impl PatternSource {
    pub fn new(fps: u32) -> Result<Self, SourceError> {
        if !(1..=60).contains(&fps) {
            return Err(SourceError::BadFrameRate(fps));
        }
        Ok(Self {
            fps,
            index: 0,
            body_len: 64,
        })
    }

    /// Reads the frame index out of a pattern frame header.
    pub fn frame_index(data: &[u8]) -> Option<u64> {
        if data.len() < PATTERN_HEADER_LEN || &data[..4] != b"PATN" {
            return None;
        }
        Some(u64::from_be_bytes(data[4..12].try_into().ok()?))
    }
}

impl MediaSource for PatternSource {
    fn kind(&self) -> MediaKind {
        MediaKind::Video
    }

    fn codec(&self) -> &'static str {
        "pattern"
    }

    fn frame_interval_ms(&self) -> u64 {
        1000 / self.fps as u64
    }

    fn next_frame(&mut self) -> MediaFrame {
        let mut data = Vec::with_capacity(PATTERN_HEADER_LEN + self.body_len);
        data.extend_from_slice(b"PATN");
        data.extend_from_slice(&self.index.to_be_bytes());
        data.extend_from_slice(&self.fps.to_be_bytes());
        data.extend((0..self.body_len).map(|i| (self.index as usize + i) as u8));
        let ticks_per_frame = VIDEO_CLOCK_RATE / self.fps;
        let frame = MediaFrame {
            kind: MediaKind::Video,
            timestamp: (self.index as u32).wrapping_mul(ticks_per_frame),
            rate: self.fps,
            index: self.index,
            data,
        };
        self.index += 1;
        frame
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FrameClock;

    #[test]
    fn one_second_is_fifty_frames_of_160_samples() {
        let mut src = ToneSource::new(440.0).unwrap();
        let mut clock = FrameClock::new(0, src.frame_interval_ms());
        let due = clock.take_due(1_000);
        assert_eq!(due, 50);
        for i in 0..due {
            let f = src.next_frame();
            assert_eq!(f.index, i);
            assert_eq!(f.data.len(), 320);
            assert_eq!(ToneSource::samples(&f.data).len(), 160);
            assert_eq!(f.timestamp as u64, i * 160);
        }
    }

    #[test]
    fn frequency_band() {
        assert!(ToneSource::new(19.9).is_err());
        assert!(ToneSource::new(3400.1).is_err());
        assert!(ToneSource::new(20.0).is_ok());
        assert!(ToneSource::new(3400.0).is_ok());
    }

    #[test]
    fn tone_frame_energy_matches_closed_form() {
        let a = DEFAULT_AMPLITUDE as f64;
        let mut src = ToneSource::new(440.0).unwrap();
        let f = src.next_frame();
        let energy: f64 = ToneSource::samples(&f.data)
            .iter()
            .map(|&s| (s as f64) * (s as f64))
            .sum();
        let expected = 160.0 * a * a / 2.0;
        assert!(
            ((energy - expected) / expected).abs() < 0.01,
            "energy {energy} vs {expected}"
        );
    }

    #[test]
    fn pattern_header_encodes_index() {
        let mut cam = PatternSource::new(25).unwrap();
        assert_eq!(cam.frame_interval_ms(), 40);
        for i in 0..3 {
            let f = cam.next_frame();
            assert_eq!(PatternSource::frame_index(&f.data), Some(i));
            assert_eq!(f.timestamp, i as u32 * 3600);
            assert_eq!(f.kind, MediaKind::Video);
        }
        assert!(PatternSource::new(0).is_err());
        assert_eq!(PatternSource::frame_index(b"nope"), None);
    }
}
