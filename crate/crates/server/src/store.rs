//! Append-only, checksummed record logs on local disk.
//!
//! Each record is one line: eight hex digits of CRC-32 over the JSON
//! payload, a space, the compact JSON, and `\n`. An append returns only
//! after the bytes are synced. A final line without its newline is a write
//! that was never acknowledged; it is cut off when the log is reopened.
//! Any complete line that fails its checksum makes the log unreadable.
//!
//! Layout under the data directory:
//!
//! ```text
//! accounts.log            account records
//! docs/<document_id>.log  revision events of one document
//! docs/<document_id>.chat conversation turns and proposals of one document
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

pub fn encode_record(json: &str) -> String {
    format!("{:08x} {json}\n", crc32fast::hash(json.as_bytes()))
}

fn decode_record(line: &str) -> Result<&str, String> {
    let (crc, json) = line.split_once(' ').ok_or("missing checksum separator")?;
    let expected = u32::from_str_radix(crc, 16).map_err(|_| format!("bad checksum field `{crc}`"))?;
    if crc.len() != 8 || crc32fast::hash(json.as_bytes()) != expected {
        return Err("checksum mismatch".into());
    }
    Ok(json)
}

/// One open log file.
#[derive(Debug)]
pub struct Log {
    path: PathBuf,
    file: File,
}

impl Log {
    /// Opens (creating if needed) and reads every record.
    pub fn open<T: DeserializeOwned>(path: impl Into<PathBuf>) -> Result<(Log, Vec<T>), StoreError> {
        let path = path.into();
        let existed = path.exists();
        let mut bytes = if existed { fs::read(&path).map_err(io_err(&path))? } else { Vec::new() };
        let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            tracing::warn!(path = %path.display(), dropped = bytes.len() - complete, "discarding unterminated tail record");
            bytes.truncate(complete);
            let file = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
            file.set_len(complete as u64).map_err(io_err(&path))?;
            file.sync_all().map_err(io_err(&path))?;
        }
        let text = std::str::from_utf8(&bytes).map_err(|e| StoreError::Corrupt {
            path: path.clone(),
            line: bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count() + 1,
            reason: "invalid UTF-8".into(),
        })?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let corrupt = |reason: String| StoreError::Corrupt { path: path.clone(), line: i + 1, reason };
            let json = decode_record(line).map_err(corrupt)?;
            records.push(serde_json::from_str(json).map_err(|e| corrupt(format!("undecodable record: {e}")))?);
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        if !existed {
            sync_parent(&path)?;
        }
        Ok((Log { path, file }, records))
    }

    /// Appends records and syncs them to disk.
    pub fn append<T: Serialize>(&mut self, records: &[T]) -> Result<(), StoreError> {
        let mut buf = String::new();
        for record in records {
            let json = serde_json::to_string(record).expect("records serialize");
            buf.push_str(&encode_record(&json));
        }
        self.file.write_all(buf.as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn sync_parent(path: &Path) -> Result<(), StoreError> {
    #[cfg(unix)]
    if let Some(parent) = path.parent() {
        File::open(parent).and_then(|d| d.sync_all()).map_err(io_err(parent))?;
    }
    Ok(())
}

/// Paths within a data directory.
#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<DataDir, StoreError> {
        let root = root.into();
        let docs = root.join("docs");
        fs::create_dir_all(&docs).map_err(io_err(&docs))?;
        Ok(DataDir { root })
    }

    pub fn accounts(&self) -> PathBuf {
        self.root.join("accounts.log")
    }

    pub fn document(&self, id: &str) -> PathBuf {
        self.root.join("docs").join(format!("{id}.log"))
    }

    pub fn conversation(&self, id: &str) -> PathBuf {
        self.root.join("docs").join(format!("{id}.chat"))
    }

    /// Ids of every document with a revision log, sorted.
    pub fn document_ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("docs");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let name = entry.map_err(io_err(&dir))?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".log")) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }
}
