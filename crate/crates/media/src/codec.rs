use serde::{Deserialize, Serialize};

use crate::frame::MediaKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecDescriptor {
    pub name: String,
    pub clock_rate: u32,
    pub payload_type: u8,
    pub kind: MediaKind,
}

impl CodecDescriptor {
    pub fn new(name: &str, clock_rate: u32, payload_type: u8, kind: MediaKind) -> Self {
        Self {
            name: name.to_string(),
            clock_rate,
            payload_type,
            kind,
        }
    }
}

/// Name ↔ payload type table. The default registry holds the three
/// pass-through pseudo-codecs; more can be registered at runtime.
#[derive(Debug, Clone)]
pub struct CodecRegistry {
    codecs: Vec<CodecDescriptor>,
}

impl Default for CodecRegistry {
    fn default() -> Self {
        Self {
            codecs: vec![
                CodecDescriptor::new("pcm16", 8000, 96, MediaKind::Audio),
                CodecDescriptor::new("tone", 8000, 97, MediaKind::Audio),
                CodecDescriptor::new("pattern", 90000, 98, MediaKind::Video),
            ],
        }
    }
}

impl CodecRegistry {
    pub fn empty() -> Self {
        Self { codecs: Vec::new() }
    }

    /// Adds a codec; returns false if the name or payload type is taken.
    pub fn register(&mut self, codec: CodecDescriptor) -> bool {
        if self.by_name(&codec.name).is_some() || self.by_payload_type(codec.payload_type).is_some()
        {
            return false;
        }
        self.codecs.push(codec);
        true
    }

    pub fn by_name(&self, name: &str) -> Option<&CodecDescriptor> {
        self.codecs.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn by_payload_type(&self, pt: u8) -> Option<&CodecDescriptor> {
        self.codecs.iter().find(|c| c.payload_type == pt)
    }

    pub fn names(&self) -> Vec<String> {
        self.codecs.iter().map(|c| c.name.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CodecDescriptor> {
        self.codecs.iter()
    }
}
