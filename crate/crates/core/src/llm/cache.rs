//! Record/replay transcript cache: an append-only JSONL file keyed by the
//! hash of the endpoint-independent request body, giving deterministic
//! offline reruns of any recorded experiment.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    #[default]
    Off,
    Record,
    Replay,
}

impl std::str::FromStr for CacheMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(CacheMode::Off),
            "record" => Ok(CacheMode::Record),
            "replay" => Ok(CacheMode::Replay),
            other => Err(Error::InvalidConfig(format!("unknown cache mode {other:?}"))),
        }
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub key: String,
    pub request: serde_json::Value,
    pub response: String,
    pub timestamp_ms: u64,
}

/// Cache key: sha256 of the canonical JSON body (sorted keys, no endpoint).
pub fn cache_key(body: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(body).expect("body serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("{:x}", hasher.finalize())
}

pub struct TranscriptCache {
    mode: CacheMode,
    entries: Mutex<HashMap<String, VecDeque<String>>>,
    writer: Mutex<Option<File>>,
}

impl TranscriptCache {
    pub fn open(mode: CacheMode, path: Option<&Path>) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut writer = None;
        match mode {
            CacheMode::Off => {}
            CacheMode::Replay => {
                let path = path.ok_or_else(|| {
                    Error::InvalidConfig("replay mode needs a cache file".into())
                })?;
                if !path.exists() {
                    return Err(Error::MissingCache(PathBuf::from(path)));
                }
                entries = load_entries(path)?;
            }
            CacheMode::Record => {
                let path = path.ok_or_else(|| {
                    Error::InvalidConfig("record mode needs a cache file".into())
                })?;
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                writer = Some(OpenOptions::new().create(true).append(true).open(path)?);
            }
        }
        Ok(TranscriptCache {
            mode,
            entries: Mutex::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    /// Replay lookup. Repeated identical requests consume the recorded
    /// responses in order; the last one sticks so a lenient extra query does
    /// not miss.
    pub fn lookup(&self, key: &str) -> Result<String> {
        let mut entries = self.entries.lock().expect("cache lock poisoned");
        let queue = entries
            .get_mut(key)
            .ok_or_else(|| Error::CacheMiss(key.to_string()))?;
        if queue.len() > 1 {
            Ok(queue.pop_front().expect("non-empty queue"))
        } else {
            queue
                .front()
                .cloned()
                .ok_or_else(|| Error::CacheMiss(key.to_string()))
        }
    }

    /// Record an exchange (serialized appends).
    pub fn append(&self, key: &str, request: &serde_json::Value, response: &str) -> Result<()> {
        let transcript = Transcript {
            key: key.to_string(),
            request: request.clone(),
            response: response.to_string(),
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        let line = serde_json::to_string(&transcript)?;
        let mut writer = self.writer.lock().expect("cache lock poisoned");
        if let Some(file) = writer.as_mut() {
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        Ok(())
    }
}

fn load_entries(path: &Path) -> Result<HashMap<String, VecDeque<String>>> {
    let file = File::open(path)?;
    let mut entries: HashMap<String, VecDeque<String>> = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let transcript: Transcript = serde_json::from_str(&line)?;
        entries
            .entry(transcript.key)
            .or_default()
            .push_back(transcript.response);
    }
    Ok(entries)
}
