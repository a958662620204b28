//! Append-only embedding cache: one JSON line `{hash, vector}` per content.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Content, Embedding, EmbeddingProvider};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CacheLine {
    hash: String,
    vector: Embedding,
}

pub struct CachedProvider<P> {
    inner: P,
    path: PathBuf,
    entries: Mutex<HashMap<String, Embedding>>,
}

pub fn content_hash(content: &Content) -> String {
    let bytes = serde_json::to_vec(content).expect("content serialises");
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn open(inner: P, path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let l: CacheLine = serde_json::from_str(&line)?;
                if l.vector.dim() == inner.dim() {
                    entries.insert(l.hash, l.vector);
                }
            }
        }
        Ok(Self {
            inner,
            path: path.to_owned(),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, content: &Content) -> Result<Embedding> {
        let hash = content_hash(content);
        if let Some(e) = self.entries.lock().unwrap().get(&hash) {
            return Ok(e.clone());
        }
        let e = self.inner.embed(content)?;
        let line = serde_json::to_string(&CacheLine {
            hash: hash.clone(),
            vector: e.clone(),
        })?;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|err| Error::io(&self.path, err))?;
        writeln!(f, "{line}").map_err(|err| Error::io(&self.path, err))?;
        self.entries.lock().unwrap().insert(hash, e.clone());
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::embedding::SyntheticEmbedder;

    struct Counting {
        inner: SyntheticEmbedder,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for Counting {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn embed(&self, c: &Content) -> Result<Embedding> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed(c)
        }
    }

    #[test]
    fn cache_persists_and_skips_inner_calls() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let make = || Counting {
            inner: SyntheticEmbedder::new(8, 3, 0.5),
            calls: AtomicUsize::new(0),
        };
        let c = CachedProvider::open(make(), &path).unwrap();
        let a = c.embed(&Content::text("one")).unwrap();
        c.embed(&Content::text("one")).unwrap();
        assert_eq!(c.inner.calls.load(Ordering::SeqCst), 1);

        let reopened = CachedProvider::open(make(), &path).unwrap();
        assert_eq!(reopened.len(), 1);
        assert_eq!(reopened.embed(&Content::text("one")).unwrap(), a);
        assert_eq!(reopened.inner.calls.load(Ordering::SeqCst), 0);
    }
}
