//! Content-addressed response cache.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::{io_err, Result};

/// sha256 over model id, temperature and prompt bytes.
pub fn cache_key(model_id: &str, temperature: f64, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0]);
    h.update(format!("{temperature:?}").as_bytes());
    h.update([0]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

/// Responses kept in memory and, when a directory is configured, as
/// `<dir>/<key[..2]>/<key>.txt`. Writes are serialized.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            dir: Some(dir),
            memory: Mutex::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.txt")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(v) = self.memory.lock().expect("cache lock").get(key) {
            return Some(v.clone());
        }
        let text = fs::read_to_string(self.path(key)?).ok()?;
        self.memory.lock().expect("cache lock").insert(key.to_string(), text.clone());
        Some(text)
    }

    pub fn put(&self, key: &str, value: &str) -> Result<()> {
        let mut mem = self.memory.lock().expect("cache lock");
        if let Some(path) = self.path(key) {
            let parent = path.parent().expect("sharded path");
            fs::create_dir_all(parent).map_err(io_err(parent))?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, value).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
        mem.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.memory.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
