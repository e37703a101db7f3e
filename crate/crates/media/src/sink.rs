use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Snapshot of a [`StatsSink`], dumped as JSON by the adaptor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkStats {
    pub frames: u64,
    pub bytes: u64,
    /// Sequence numbers skipped so far (a lost packet counts once).
    pub gaps: u64,
    pub last_seq: Option<u16>,
}

/// Measuring sink standing in for a speaker or display. Counts frames and
/// bytes and detects holes in the 16-bit sequence space.
#[derive(Debug, Default)]
pub struct StatsSink {
    inner: Mutex<SinkStats>,
}

impl StatsSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_packet(&self, seq: u16, len: usize) {
        let mut st = self.inner.lock().unwrap();
        st.frames += 1;
        st.bytes += len as u64;
        match st.last_seq {
            None => st.last_seq = Some(seq),
            Some(last) => {
                let delta = seq.wrapping_sub(last);
                if delta == 0 {
                    // duplicate
                } else if delta < 0x8000 {
                    st.gaps += u64::from(delta - 1);
                    st.last_seq = Some(seq);
                } else {
                    // late arrival fills a hole counted earlier
                    st.gaps = st.gaps.saturating_sub(1);
                }
            }
        }
    }

    pub fn snapshot(&self) -> SinkStats {
        *self.inner.lock().unwrap()
    }

    pub fn reset(&self) {
        *self.inner.lock().unwrap() = SinkStats::default();
    }
}
