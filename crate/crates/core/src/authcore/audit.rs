use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    Registered,
    Accepted,
    Denied,
    LockedOut,
    Expired,
}

/// One authentication event. Never carries passwords, seeds or orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub timestamp_ms: u64,
    pub username: String,
    pub outcome: AuditOutcome,
    pub hash_evaluations: u64,
}

/// In-memory audit trail with an optional JSON-lines file sink.
#[derive(Debug, Default)]
pub struct AuditLog {
    entries: Mutex<Vec<AuditEntry>>,
    sink: Option<Mutex<File>>,
}

impl AuditLog {
    pub fn with_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog { entries: Mutex::default(), sink: Some(Mutex::new(f)) })
    }

    pub fn record(&self, entry: AuditEntry) {
        if let Some(sink) = &self.sink {
            let line = serde_json::to_string(&entry).expect("audit entries serialize");
            if let Err(e) = writeln!(sink.lock().unwrap(), "{line}") {
                log::warn!("audit sink write failed: {e}");
            }
        }
        self.entries.lock().unwrap().push(entry);
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.entries.lock().unwrap().clone()
    }
}
