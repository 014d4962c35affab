use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub raw: String,
    pub generations: Vec<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl CacheEntry {
    pub fn new(fingerprint: String, raw: String, generations: Vec<String>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            fingerprint,
            raw,
            generations,
            timestamp,
        }
    }
}

/// Append-only JSONL cache of completions keyed by request fingerprint.
/// The last line for a key wins; unreadable lines are skipped.
#[derive(Debug)]
pub struct DecompositionCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, CacheEntry>>,
    writer: Mutex<Option<BufWriter<File>>>,
    skipped_lines: usize,
}

impl DecompositionCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
            skipped_lines: 0,
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) => {
                        entries.insert(entry.fingerprint.clone(), entry);
                    }
                    Err(e) => {
                        skipped += 1;
                        log::warn!("{}:{}: ignoring corrupted cache line ({e})", path.display(), idx + 1);
                    }
                }
            }
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        // A torn final line from a crash would otherwise swallow the next append.
        let needs_newline = std::fs::read(path)
            .map(|b| b.last().is_some_and(|&c| c != b'\n'))
            .unwrap_or(false);
        let mut writer = BufWriter::new(file);
        if needs_newline {
            writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(writer)),
            skipped_lines: skipped,
        })
    }

    /// Lines ignored while loading.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, fingerprint: &str) -> Option<CacheEntry> {
        self.entries.lock().unwrap().get(fingerprint).cloned()
    }

    pub fn put(&self, entry: CacheEntry) -> Result<()> {
        let mut writer = self.writer.lock().unwrap();
        if let Some(w) = writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new(""));
            let line = serde_json::to_string(&entry)?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        self.entries
            .lock()
            .unwrap()
            .insert(entry.fingerprint.clone(), entry);
        Ok(())
    }
}
