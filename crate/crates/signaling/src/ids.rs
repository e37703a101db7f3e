use std::collections::HashMap;

/// Source of resource identifiers. Swappable so tests get stable ids.
pub trait IdGenerator: Send {
    fn contact_id(&mut self, aor: &str) -> String;
    fn call_id(&mut self) -> String;
    fn participant_id(&mut self, call_id: &str) -> String;
    /// Called for ids replayed from persistent storage so they are not reissued.
    fn observe_contact_id(&mut self, aor: &str, contact_id: &str);
}

/// `"c"` + per-aor counter for contacts, `"c"` + global counter for calls,
/// `"p"` + per-call counter for participants.
#[derive(Debug, Clone)]
pub struct SequentialIds {
    contact_start: u64,
    next_call: u64,
    contacts: HashMap<String, u64>,
    participants: HashMap<String, u64>,
}

impl Default for SequentialIds {
    fn default() -> Self {
        Self::new(1, 100)
    }
}

impl SequentialIds {
    pub fn new(contact_start: u64, call_start: u64) -> Self {
        Self {
            contact_start,
            next_call: call_start,
            contacts: HashMap::new(),
            participants: HashMap::new(),
        }
    }
}

impl IdGenerator for SequentialIds {
    fn contact_id(&mut self, aor: &str) -> String {
        let next = self
            .contacts
            .entry(aor.to_string())
            .or_insert(self.contact_start);
        let id = format!("c{next}");
        *next += 1;
        id
    }

    fn call_id(&mut self) -> String {
        let id = format!("c{}", self.next_call);
        self.next_call += 1;
        id
    }

    fn participant_id(&mut self, call_id: &str) -> String {
        let next = self.participants.entry(call_id.to_string()).or_insert(1);
        let id = format!("p{next}");
        *next += 1;
        id
    }

    fn observe_contact_id(&mut self, aor: &str, contact_id: &str) {
        if let Some(n) = contact_id.strip_prefix('c').and_then(|n| n.parse::<u64>().ok()) {
            let next = self
                .contacts
                .entry(aor.to_string())
                .or_insert(self.contact_start);
            *next = (*next).max(n + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences() {
        let mut ids = SequentialIds::default();
        assert_eq!(ids.contact_id("a@x"), "c1");
        assert_eq!(ids.contact_id("a@x"), "c2");
        assert_eq!(ids.contact_id("b@x"), "c1");
        assert_eq!(ids.call_id(), "c100");
        assert_eq!(ids.call_id(), "c101");
        assert_eq!(ids.participant_id("c100"), "p1");
        assert_eq!(ids.participant_id("c100"), "p2");
        assert_eq!(ids.participant_id("c101"), "p1");
    }

    #[test]
    fn observed_ids_are_skipped() {
        let mut ids = SequentialIds::new(2, 123);
        ids.observe_contact_id("a@x", "c7");
        assert_eq!(ids.contact_id("a@x"), "c8");
        assert_eq!(ids.contact_id("b@x"), "c2");
        assert_eq!(ids.call_id(), "c123");
    }
}
