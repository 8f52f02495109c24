//! Append-only reviewer feedback log.
//!
//! Each record is one JSON line. A record is acknowledged only after its line
//! has been written and synced. On open the log is replayed; a trailing line
//! without a newline is the remains of an interrupted append and is cut off.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use lpx_core::eval::FeedbackRecord;
use lpx_core::explain::Technique;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("verdict already recorded for this link, technique and annotator")]
    Duplicate,
    #[error("{path}: line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

type Key = (String, Technique, String);

pub struct FeedbackLog {
    path: PathBuf,
    file: File,
    records: Vec<FeedbackRecord>,
    keys: HashSet<Key>,
    /// Bytes of an interrupted append dropped during replay.
    pub discarded_tail: usize,
}

impl FeedbackLog {
    pub fn open(path: &Path) -> Result<Self, FeedbackError> {
        let io_err = |source| FeedbackError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err)?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let discarded_tail = bytes.len() - complete;
        if discarded_tail > 0 {
            file.set_len(complete as u64).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err)?;

        let mut records = Vec::new();
        let mut keys = HashSet::new();
        let text = String::from_utf8_lossy(&bytes[..complete]);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: FeedbackRecord =
                serde_json::from_str(line).map_err(|e| FeedbackError::Corrupt {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            if keys.insert(record.key()) {
                records.push(record);
            }
        }
        Ok(FeedbackLog {
            path: path.to_path_buf(),
            file,
            records,
            keys,
            discarded_tail,
        })
    }

    pub fn records(&self) -> &[FeedbackRecord] {
        &self.records
    }

    pub fn contains(&self, record: &FeedbackRecord) -> bool {
        self.keys.contains(&record.key())
    }

    /// Append and sync one record.
    pub fn append(&mut self, record: FeedbackRecord) -> Result<(), FeedbackError> {
        if self.contains(&record) {
            return Err(FeedbackError::Duplicate);
        }
        let mut line = serde_json::to_vec(&record).expect("feedback records serialize");
        line.push(b'\n');
        let before = self.file.metadata().map(|m| m.len());
        if let Err(source) = self.file.write_all(&line).and_then(|()| self.file.sync_data()) {
            // Leave no half-written line behind for the next append to extend.
            if let Ok(len) = before {
                let _ = self.file.set_len(len);
            }
            return Err(FeedbackError::Io {
                path: self.path.clone(),
                source,
            });
        }
        self.keys.insert(record.key());
        self.records.push(record);
        Ok(())
    }
}
