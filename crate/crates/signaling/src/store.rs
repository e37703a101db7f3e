//! Durable log of registry mutations.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::model::ContactRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StoreRecord {
    Upsert { contact: ContactRecord },
    Remove { aor: String, contact_id: String },
}

pub trait Store: Send + Sync {
    fn append(&self, record: &StoreRecord) -> io::Result<()>;
    fn load(&self) -> io::Result<Vec<StoreRecord>>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    records: Mutex<Vec<StoreRecord>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemoryStore {
    fn append(&self, record: &StoreRecord) -> io::Result<()> {
        self.records.lock().unwrap().push(record.clone());
        Ok(())
    }

    fn load(&self) -> io::Result<Vec<StoreRecord>> {
        Ok(self.records.lock().unwrap().clone())
    }
}

/// Append-only JSON-lines file, replayed at startup.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl FileStore {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }
}

impl Store for FileStore {
    fn append(&self, record: &StoreRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap();
        f.write_all(&line)?;
        f.flush()
    }

    fn load(&self) -> io::Result<Vec<StoreRecord>> {
        let reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(rec) => out.push(rec),
                // a torn final write is tolerated, anything else is corruption
                Err(e) => tracing::warn!(line = n + 1, error = %e, "skipping unreadable store record"),
            }
        }
        Ok(out)
    }
}
