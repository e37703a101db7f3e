//! Generators for valid SIP messages and byte-level mutations.

use proptest::prelude::*;
use webvoice_gateway::{Method, SipMessage, StartLine};

#[derive(Debug, Clone)]
pub enum Mutation {
    Flip { at: usize, bit: u8 },
    Replace { at: usize, byte: u8 },
    Truncate { keep: usize },
    Insert { at: usize, bytes: Vec<u8> },
    Delete { at: usize, len: usize },
    DuplicateLine { at: usize },
}

pub fn mutation() -> impl Strategy<Value = Mutation> {
    let special = prop_oneof![
        Just(b'\r'),
        Just(b'\n'),
        Just(b':'),
        Just(b' '),
        Just(b';'),
        Just(b'<'),
        Just(b'>'),
        Just(0u8),
        Just(0xff),
        any::<u8>(),
    ];
    prop_oneof![
        (any::<usize>(), 0u8..8).prop_map(|(at, bit)| Mutation::Flip { at, bit }),
        (any::<usize>(), special).prop_map(|(at, byte)| Mutation::Replace { at, byte }),
        any::<usize>().prop_map(|keep| Mutation::Truncate { keep }),
        (any::<usize>(), prop::collection::vec(any::<u8>(), 1..8)).prop_map(|(at, bytes)| Mutation::Insert { at, bytes }),
        (any::<usize>(), 1usize..40).prop_map(|(at, len)| Mutation::Delete { at, len }),
        any::<usize>().prop_map(|at| Mutation::DuplicateLine { at }),
    ]
}

pub fn mutate(input: &[u8], edits: &[Mutation]) -> Vec<u8> {
    let mut b = input.to_vec();
    for e in edits {
        let n = b.len().max(1);
        match e {
            Mutation::Flip { at, bit } => {
                if !b.is_empty() {
                    b[at % n] ^= 1 << bit;
                }
            }
            Mutation::Replace { at, byte } => {
                if !b.is_empty() {
                    b[at % n] = *byte;
                }
            }
            Mutation::Truncate { keep } => b.truncate(keep % n),
            Mutation::Insert { at, bytes } => {
                let at = at % (b.len() + 1);
                b.splice(at..at, bytes.iter().copied());
            }
            Mutation::Delete { at, len } => {
                let at = at % n;
                let end = (at + len).min(b.len());
                if at < end {
                    b.drain(at..end);
                }
            }
            Mutation::DuplicateLine { at } => {
                let starts: Vec<usize> = std::iter::once(0)
                    .chain(b.iter().enumerate().filter(|(_, c)| **c == b'\n').map(|(i, _)| i + 1))
                    .filter(|i| *i < b.len())
                    .collect();
                if let Some(&start) = starts.get(at % starts.len().max(1)) {
                    let end = b[start..].iter().position(|c| *c == b'\n').map_or(b.len(), |p| start + p + 1);
                    let line = b[start..end].to_vec();
                    b.splice(start..start, line);
                }
            }
        }
    }
    b
}

fn token() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9.!%*_+`'~-]{0,11}"
}

fn value() -> impl Strategy<Value = String> {
    "[!-~]([ -~]{0,30}[!-~])?"
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![
        Just(Method::Register),
        Just(Method::Invite),
        Just(Method::Ack),
        Just(Method::Bye),
        Just(Method::Cancel),
        Just(Method::Options),
        "[A-Z]{3,9}".prop_map(|m| Method::parse(&m)),
    ]
}

/// Messages built from the grammar: valid start line, the mandatory headers,
/// some extension headers and a body with a matching Content-Length.
pub fn valid_message() -> impl Strategy<Value = SipMessage> {
    let start = prop_oneof![
        (method(), token(), token()).prop_map(|(method, user, host)| StartLine::Request {
            method,
            uri: format!("sip:{user}@{host}"),
        }),
        (100u16..700, "[A-Za-z][A-Za-z ]{0,20}").prop_map(|(status, reason)| StartLine::Response {
            status,
            reason: reason.trim_end().to_string(),
        }),
    ];
    (
        start,
        prop::collection::vec(value(), 5),
        1u32..100_000,
        prop::collection::vec((token(), value()), 0..5),
        prop::collection::vec(any::<u8>(), 0..64),
    )
        .prop_map(|(start, v, cseq, extra, body)| {
            let cseq_method = match &start {
                StartLine::Request { method, .. } => method.clone(),
                StartLine::Response { .. } => Method::Invite,
            };
            let mut msg = SipMessage { start, headers: Default::default(), body: Vec::new() };
            msg.headers.push("Via", format!("SIP/2.0/UDP {};branch=z9hG4bK{cseq}", v[0]));
            msg.headers.push("From", v[1].clone());
            msg.headers.push("To", v[2].clone());
            msg.headers.push("Call-ID", v[3].clone());
            msg.headers.push("CSeq", format!("{cseq} {cseq_method}"));
            msg.headers.push("Contact", v[4].clone());
            for (name, value) in extra {
                let clashes = ["content-length", "l", "cseq", "via", "v", "from", "f", "to", "t", "call-id", "i", "contact", "m"];
                if !clashes.contains(&name.to_ascii_lowercase().as_str()) {
                    msg.headers.push(name, value);
                }
            }
            msg.headers.push("Content-Length", body.len().to_string());
            msg.body = body;
            msg
        })
}
