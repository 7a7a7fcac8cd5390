//! Append-only account file.
//!
//! Layout (UTF-8, `\n` line endings):
//!
//! ```text
//! GOTCHA-ACCOUNTS\tv1
//! <record>
//! <record>
//! ```
//!
//! A record is a tab-separated line:
//! `username  k  alpha  seed_bits  hash_cost  extractor_salt  hash_salt  password_hash  label_1 .. label_k`
//! where the username and labels are base64 of their UTF-8 bytes, the salts
//! and hash are base64 of raw bytes, and the integers are decimal. Base64 is
//! the standard alphabet with padding.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

use super::record::{AccountRecord, HashCost};
use crate::gotcha::PuzzleParams;
use crate::seedcore::Seed;

pub const STORE_HEADER: &str = "GOTCHA-ACCOUNTS\tv1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("account store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("account store line {line} is corrupt: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("unsupported account store header {0:?}")]
    Version(String),
    #[error("username {0:?} already exists")]
    Duplicate(String),
}

/// Accounts keyed by username, optionally mirrored to a file.
#[derive(Debug, Default)]
pub struct AccountStore {
    path: Option<PathBuf>,
    file: Option<File>,
    records: BTreeMap<String, AccountRecord>,
}

impl AccountStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens or creates the file at `path`. Any malformed line refuses the whole store.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut records = BTreeMap::new();
        if path.exists() && std::fs::metadata(&path)?.len() > 0 {
            let reader = BufReader::new(File::open(&path)?);
            let mut lines = reader.lines();
            let header = lines.next().transpose()?.unwrap_or_default();
            if header != STORE_HEADER {
                return Err(StoreError::Version(header));
            }
            for (i, line) in lines.enumerate() {
                let line = line?;
                let lineno = i + 2;
                if line.is_empty() {
                    continue;
                }
                let rec = decode_line(&line).map_err(|reason| StoreError::Corrupt { line: lineno, reason })?;
                if records.contains_key(&rec.username) {
                    return Err(StoreError::Corrupt { line: lineno, reason: "duplicate username".into() });
                }
                records.insert(rec.username.clone(), rec);
            }
        } else {
            let mut f = File::create(&path)?;
            writeln!(f, "{STORE_HEADER}")?;
            f.sync_all()?;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok(AccountStore { path: Some(path), file: Some(file), records })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, username: &str) -> bool {
        self.records.contains_key(username)
    }

    pub fn get(&self, username: &str) -> Option<&AccountRecord> {
        self.records.get(username)
    }

    pub fn records(&self) -> impl Iterator<Item = &AccountRecord> {
        self.records.values()
    }

    /// Adds a record, appending and syncing one line when file-backed.
    pub fn insert(&mut self, record: AccountRecord) -> Result<(), StoreError> {
        if self.records.contains_key(&record.username) {
            return Err(StoreError::Duplicate(record.username));
        }
        if let Some(f) = self.file.as_mut() {
            let mut line = encode_line(&record);
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        self.records.insert(record.username.clone(), record);
        Ok(())
    }
}

pub fn encode_line(r: &AccountRecord) -> String {
    let mut fields = vec![
        STANDARD.encode(r.username.as_bytes()),
        r.params.k.to_string(),
        r.params.alpha.to_string(),
        r.params.seed_bits.to_string(),
        r.hash_cost.level().to_string(),
        STANDARD.encode(r.extractor_salt.as_bytes()),
        STANDARD.encode(r.hash_salt.as_bytes()),
        STANDARD.encode(&r.password_hash),
    ];
    fields.extend(r.permuted_labels.iter().map(|l| STANDARD.encode(l.as_bytes())));
    fields.join("\t")
}

pub fn decode_line(line: &str) -> Result<AccountRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 9 {
        return Err(format!("expected at least 9 fields, found {}", fields.len()));
    }
    let b64 = |s: &str, what: &str| STANDARD.decode(s).map_err(|e| format!("{what}: {e}"));
    let text = |s: &str, what: &str| String::from_utf8(b64(s, what)?).map_err(|e| format!("{what}: {e}"));
    let int = |s: &str, what: &str| s.parse::<usize>().map_err(|e| format!("{what}: {e}"));
    let username = text(fields[0], "username")?;
    let k = int(fields[1], "k")?;
    let alpha = int(fields[2], "alpha")?;
    let seed_bits = int(fields[3], "seed_bits")?;
    let cost = int(fields[4], "hash_cost")?;
    let cost = u8::try_from(cost)
        .ok()
        .and_then(|c| HashCost::new(c).ok())
        .ok_or_else(|| format!("hash_cost {cost} out of range"))?;
    let params = PuzzleParams { k, alpha, seed_bits, ..Default::default() };
    params.validate().map_err(|e| e.to_string())?;
    let extractor_salt = Seed::from_bytes(b64(fields[5], "extractor_salt")?).map_err(|e| e.to_string())?;
    let hash_salt = Seed::from_bytes(b64(fields[6], "hash_salt")?).map_err(|e| e.to_string())?;
    let password_hash = b64(fields[7], "password_hash")?;
    if fields.len() != 8 + k {
        return Err(format!("expected {k} labels, found {}", fields.len() - 8));
    }
    let permuted_labels = fields[8..].iter().map(|f| text(f, "label")).collect::<Result<Vec<_>, _>>()?;
    Ok(AccountRecord { username, extractor_salt, hash_salt, password_hash, permuted_labels, params, hash_cost: cost })
}
