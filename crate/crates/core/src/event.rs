//! Sequenced event frames and the bounded per-subscriber channel that
//! carries them to a long-lived HTTP response.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::Notify;

/// Frame type of the terminal event pushed when a consumer falls too far behind.
pub const OVERFLOW_EVENT: &str = "error";

/// One event on a subscription, serialized as a single NDJSON line:
/// `{"seq":N,"type":"...","resource":"...","timestamp":T,"payload":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFrame {
    pub seq: u64,
    #[serde(rename = "type")]
    pub kind: String,
    pub resource: String,
    pub timestamp: u64,
    pub payload: Value,
}

impl EventFrame {
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("event frames always serialize");
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SendError {
    #[error("event channel closed")]
    Closed,
}

#[derive(Debug)]
struct State {
    queue: VecDeque<EventFrame>,
    next_seq: u64,
    closed: bool,
    receiver_dropped: bool,
}

#[derive(Debug)]
struct Shared {
    state: Mutex<State>,
    notify: Notify,
    capacity: usize,
}

/// Constructor for a bounded single-consumer event channel.
///
/// Sequence numbers are assigned on send, start at 1 and never skip. When the
/// queue already holds `capacity` undelivered frames the channel pushes one
/// terminal [`OVERFLOW_EVENT`] frame and closes; later sends fail.
pub struct EventChannel;

impl EventChannel {
    pub fn bounded(capacity: usize) -> (EventSender, EventReceiver) {
        let shared = Arc::new(Shared {
            state: Mutex::new(State {
                queue: VecDeque::new(),
                next_seq: 1,
                closed: false,
                receiver_dropped: false,
            }),
            notify: Notify::new(),
            capacity: capacity.max(1),
        });
        (
            EventSender {
                shared: shared.clone(),
            },
            EventReceiver { shared },
        )
    }
}

#[derive(Debug, Clone)]
pub struct EventSender {
    shared: Arc<Shared>,
}

impl EventSender {
    /// Queues an event and returns the sequence number it was given.
    pub fn send(
        &self,
        kind: &str,
        resource: &str,
        timestamp: u64,
        payload: Value,
    ) -> Result<u64, SendError> {
        let mut st = self.shared.state.lock().unwrap();
        if st.closed || st.receiver_dropped {
            return Err(SendError::Closed);
        }
        let seq = st.next_seq;
        st.next_seq += 1;
        if st.queue.len() >= self.shared.capacity {
            st.queue.push_back(EventFrame {
                seq,
                kind: OVERFLOW_EVENT.to_string(),
                resource: resource.to_string(),
                timestamp,
                payload: serde_json::json!({"reason": "overflow", "capacity": self.shared.capacity}),
            });
            st.closed = true;
            drop(st);
            self.shared.notify.notify_one();
            return Err(SendError::Closed);
        }
        st.queue.push_back(EventFrame {
            seq,
            kind: kind.to_string(),
            resource: resource.to_string(),
            timestamp,
            payload,
        });
        drop(st);
        self.shared.notify.notify_one();
        Ok(seq)
    }

    /// Ends the stream after the frames already queued.
    pub fn close(&self) {
        self.shared.state.lock().unwrap().closed = true;
        self.shared.notify.notify_one();
    }

    pub fn is_closed(&self) -> bool {
        let st = self.shared.state.lock().unwrap();
        st.closed || st.receiver_dropped
    }
}

#[derive(Debug)]
pub struct EventReceiver {
    shared: Arc<Shared>,
}

impl EventReceiver {
    pub fn try_recv(&self) -> Option<EventFrame> {
        self.shared.state.lock().unwrap().queue.pop_front()
    }

    /// Drains every frame currently queued.
    pub fn drain(&self) -> Vec<EventFrame> {
        self.shared.state.lock().unwrap().queue.drain(..).collect()
    }

    /// True once the sender closed the channel (frames may still be queued).
    pub fn is_closed(&self) -> bool {
        self.shared.state.lock().unwrap().closed
    }

    /// Waits for the next frame; `None` once the channel is closed and empty.
    pub async fn recv(&self) -> Option<EventFrame> {
        loop {
            {
                let mut st = self.shared.state.lock().unwrap();
                if let Some(frame) = st.queue.pop_front() {
                    return Some(frame);
                }
                if st.closed {
                    return None;
                }
            }
            self.shared.notify.notified().await;
        }
    }

    pub fn into_stream(self) -> impl Stream<Item = EventFrame> + Send + 'static {
        futures::stream::unfold(self, |rx| async move {
            let frame = rx.recv().await?;
            Some((frame, rx))
        })
    }
}

impl Drop for EventReceiver {
    fn drop(&mut self) {
        if let Ok(mut st) = self.shared.state.lock() {
            st.receiver_dropped = true;
            st.queue.clear();
        }
    }
}
