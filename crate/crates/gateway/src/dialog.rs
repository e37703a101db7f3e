use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialogPhase {
    Early,
    Confirmed,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DialogError {
    #[error("dialog is terminated")]
    Terminated,
    #[error("CSeq {got} does not exceed {last}")]
    StaleCSeq { last: u32, got: u32 },
}

/// One SIP dialog as seen by the gateway. The route set is always empty.
#[derive(Debug, Clone)]
pub struct DialogState {
    pub call_id: String,
    pub local_uri: String,
    pub remote_uri: String,
    pub local_tag: String,
    pub remote_tag: Option<String>,
    /// Where in-dialog requests go (the peer's Contact).
    pub remote_target: String,
    pub local_cseq: u32,
    pub remote_cseq: Option<u32>,
    pub route_set: Vec<String>,
    pub phase: DialogPhase,
    pub acks_sent: u32,
    pub byes_sent: u32,
}

impl DialogState {
    pub fn new(call_id: &str, local_uri: &str, remote_uri: &str, local_tag: &str, remote_target: &str) -> Self {
        Self {
            call_id: call_id.to_string(),
            local_uri: local_uri.to_string(),
            remote_uri: remote_uri.to_string(),
            local_tag: local_tag.to_string(),
            remote_tag: None,
            remote_target: remote_target.to_string(),
            local_cseq: 0,
            remote_cseq: None,
            route_set: Vec::new(),
            phase: DialogPhase::Early,
            acks_sent: 0,
            byes_sent: 0,
        }
    }

    /// CSeq for the next request this side sends.
    pub fn next_cseq(&mut self) -> Result<u32, DialogError> {
        if self.phase == DialogPhase::Terminated {
            return Err(DialogError::Terminated);
        }
        self.local_cseq += 1;
        Ok(self.local_cseq)
    }

    /// Accepts a request from the peer only if its CSeq moves forward.
    pub fn accept_remote(&mut self, cseq: u32) -> Result<(), DialogError> {
        if let Some(last) = self.remote_cseq {
            if cseq <= last {
                return Err(DialogError::StaleCSeq { last, got: cseq });
            }
        }
        self.remote_cseq = Some(cseq);
        Ok(())
    }

    pub fn confirm(&mut self, remote_tag: Option<&str>) {
        if let Some(tag) = remote_tag {
            self.remote_tag = Some(tag.to_string());
        }
        if self.phase == DialogPhase::Early {
            self.phase = DialogPhase::Confirmed;
        }
    }

    pub fn terminate(&mut self) {
        self.phase = DialogPhase::Terminated;
    }

    pub fn is_terminated(&self) -> bool {
        self.phase == DialogPhase::Terminated
    }

    pub fn local_header(&self) -> String {
        format!("<{}>;tag={}", self.local_uri, self.local_tag)
    }

    pub fn remote_header(&self) -> String {
        match &self.remote_tag {
            Some(tag) => format!("<{}>;tag={tag}", self.remote_uri),
            None => format!("<{}>", self.remote_uri),
        }
    }
}
