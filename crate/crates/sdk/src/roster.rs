use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use webvoice_core::EventFrame;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Presence {
    pub online: bool,
    /// Contact ids currently registered for the aor.
    pub contacts: Vec<String>,
}

/// Contact list fed by `contact-update` events on the `/login` collection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RosterModel {
    pub entries: BTreeMap<String, Presence>,
    pub version: u64,
}

impl RosterModel {
    /// Seeds an entry from a read of `/login/{aor}`; does not bump the version.
    pub fn seed(&mut self, aor: &str, contacts: Vec<String>) {
        self.entries.insert(
            aor.to_string(),
            Presence {
                online: !contacts.is_empty(),
                contacts,
            },
        );
    }

    /// Applies one event. Returns false for anything that is not a contact update.
    pub fn apply(&mut self, frame: &EventFrame) -> bool {
        if frame.kind != "contact-update" {
            return false;
        }
        let p = &frame.payload;
        let (Some(aor), Some(cid), Some(action)) = (
            p["aor"].as_str(),
            p["contact_id"].as_str(),
            p["action"].as_str(),
        ) else {
            return false;
        };
        let entry = self.entries.entry(aor.to_string()).or_insert(Presence {
            online: false,
            contacts: Vec::new(),
        });
        let present = matches!(action, "registered" | "updated");
        entry.contacts.retain(|c| c != cid);
        if present {
            entry.contacts.push(cid.to_string());
            entry.contacts.sort();
        }
        entry.online = match p.get("online").and_then(Value::as_bool) {
            Some(online) => online,
            None => !entry.contacts.is_empty(),
        };
        self.version += 1;
        true
    }

    pub fn online(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|(_, p)| p.online).map(|(a, _)| a.as_str())
    }
}
