use crate::event::EventFrame;

/// Incremental decoder for newline-delimited JSON event streams. Chunk
/// boundaries of the underlying HTTP body need not align with lines.
#[derive(Debug, Default)]
pub struct NdjsonDecoder {
    buf: Vec<u8>,
}

impl NdjsonDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, chunk: &[u8]) -> Vec<Result<EventFrame, serde_json::Error>> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        while let Some(pos) = self.buf.iter().position(|b| *b == b'\n') {
            let line: Vec<u8> = self.buf.drain(..=pos).collect();
            let line = &line[..line.len() - 1];
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            out.push(serde_json::from_slice(line));
        }
        out
    }

    /// Bytes of an incomplete trailing line.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn frames(n: u64) -> Vec<EventFrame> {
        (1..=n)
            .map(|seq| EventFrame {
                seq,
                kind: "membership-change".into(),
                resource: "/call/c100".into(),
                timestamp: seq * 10,
                payload: json!({"n": seq}),
            })
            .collect()
    }

    proptest! {
        #[test]
        fn any_chunking_decodes_same_frames(cuts in proptest::collection::vec(0usize..400, 0..10)) {
            let expected = frames(6);
            let wire: Vec<u8> = expected.iter().flat_map(|f| f.to_line().into_bytes()).collect();
            let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c % (wire.len() + 1)).collect();
            cuts.sort_unstable();
            let mut dec = NdjsonDecoder::new();
            let mut got = Vec::new();
            let mut start = 0;
            for cut in cuts.into_iter().chain(std::iter::once(wire.len())) {
                for r in dec.push(&wire[start..cut]) {
                    got.push(r.unwrap());
                }
                start = cut;
            }
            prop_assert_eq!(got, expected);
            prop_assert_eq!(dec.pending(), 0);
        }
    }

    #[test]
    fn skips_blank_lines_and_reports_garbage() {
        let mut dec = NdjsonDecoder::new();
        let out = dec.push(b"\n  \nnot json\n");
        assert_eq!(out.len(), 1);
        assert!(out[0].is_err());
    }
}
