//! Client transaction timing over UDP.
//!
//! A request is sent at 0, 0.5, 1.5, 3.5 and 7.5 s (T1 = 500 ms, doubling)
//! and gives up 15.5 s after the first send. A provisional response stops
//! retransmission; an INVITE then waits up to the ring timeout for a final
//! answer.

use std::net::SocketAddr;
use std::time::Duration;

use thiserror::Error;
use tokio::sync::mpsc;
use tokio::time::{sleep_until, Instant};

use crate::message::{Method, SipMessage};
use crate::socket::SipSocket;

/// Offsets of the five transmissions, in milliseconds.
pub const RETRANSMIT_MS: [u64; 5] = [0, 500, 1_500, 3_500, 7_500];
/// Time from the first send until the transaction times out.
pub const TIMEOUT_MS: u64 = 15_500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransactionError {
    #[error("no final response within the timer budget")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("transaction aborted")]
    Aborted,
}

/// Sends `request` and waits for its final response.
pub async fn run_client(
    socket: &dyn SipSocket,
    to: SocketAddr,
    request: &SipMessage,
    responses: &mut mpsc::UnboundedReceiver<SipMessage>,
    ring_timeout: Duration,
) -> Result<SipMessage, TransactionError> {
    let bytes = request.serialize();
    let start = Instant::now();
    let mut deadline = start + Duration::from_millis(TIMEOUT_MS);
    let mut sent = 0;
    let mut retransmitting = true;
    loop {
        let next_send = RETRANSMIT_MS
            .get(sent)
            .filter(|_| retransmitting)
            .map(|ms| start + Duration::from_millis(*ms));
        let wake = next_send.map_or(deadline, |t| t.min(deadline));
        tokio::select! {
            biased;
            msg = responses.recv() => {
                let Some(msg) = msg else {
                    return Err(TransactionError::Aborted);
                };
                match msg.status() {
                    Some(s) if s >= 200 => return Ok(msg),
                    Some(_) if retransmitting => {
                        retransmitting = false;
                        if request.method() == Some(&Method::Invite) {
                            deadline = Instant::now() + ring_timeout;
                        }
                    }
                    Some(_) => {}
                    None => {}
                }
            }
            _ = sleep_until(wake) => {
                if Instant::now() >= deadline {
                    return Err(TransactionError::Timeout);
                }
                sent += 1;
                socket
                    .send_to(&bytes, to)
                    .await
                    .map_err(|e| TransactionError::Transport(e.to_string()))?;
            }
        }
    }
}
