//! Client for an external sentence-embedding service with a persistent,
//! append-only vector cache.
//!
//! Wire format: `POST {endpoint}` with `{"model": ..., "texts": [...]}`,
//! answered by `{"vectors": [[...], ...]}` in request order.

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding service timed out")]
    Timeout,
    #[error("embedding service unavailable: {0}")]
    Unavailable(String),
    #[error("malformed embedding reply: {0}")]
    Malformed(String),
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub model: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub vectors: Vec<Vec<f64>>,
}

pub trait EmbeddingTransport: Send + Sync {
    fn embed(&self, request: &EmbedRequest) -> Result<EmbedResponse, EmbeddingError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpTransport { endpoint: endpoint.to_string(), agent }
    }
}

fn is_timeout(err: &ureq::Transport) -> bool {
    use std::error::Error as _;
    let mut source = err.source();
    while let Some(e) = source {
        if let Some(io) = e.downcast_ref::<std::io::Error>() {
            return matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock);
        }
        source = e.source();
    }
    false
}

impl EmbeddingTransport for HttpTransport {
    fn embed(&self, request: &EmbedRequest) -> Result<EmbedResponse, EmbeddingError> {
        let reply = self.agent.post(&self.endpoint).send_json(request).map_err(|e| match e {
            ureq::Error::Status(code, _) => EmbeddingError::Unavailable(format!("HTTP {code}")),
            ureq::Error::Transport(t) if is_timeout(&t) => EmbeddingError::Timeout,
            ureq::Error::Transport(t) => EmbeddingError::Unavailable(t.to_string()),
        })?;
        reply.into_json().map_err(|e| EmbeddingError::Malformed(e.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    model: String,
    hash: String,
    vector: Vec<f64>,
}

/// SHA-256 of the UTF-8 text, hex encoded.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

type Entries = HashMap<(String, String), Arc<Vec<f64>>>;

/// Vectors keyed by (model, text hash). Readers share a lock; appends to the
/// backing file are serialized.
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: RwLock<Entries>,
    writer: Mutex<Option<File>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache { path: None, entries: RwLock::new(HashMap::new()), writer: Mutex::new(None) }
    }

    /// Opens or creates a cache file of JSON lines. A torn final line from an
    /// interrupted append is truncated away.
    pub fn open(path: &Path) -> Result<Self, EmbeddingError> {
        let cache_err = |message: String| EmbeddingError::Cache { path: path.display().to_string(), message };
        let mut entries = HashMap::new();
        let mut valid_len = 0u64;
        let mut torn = false;
        if path.exists() {
            let file = File::open(path).map_err(|e| cache_err(e.to_string()))?;
            let mut reader = BufReader::new(file);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let read = reader.read_line(&mut line).map_err(|e| cache_err(e.to_string()))?;
                if read == 0 {
                    break;
                }
                lineno += 1;
                let complete = line.ends_with('\n');
                if line.trim().is_empty() {
                    valid_len += read as u64;
                    continue;
                }
                match (serde_json::from_str::<CacheRecord>(line.trim_end()), complete) {
                    (Ok(r), true) => {
                        entries.insert((r.model, r.hash), Arc::new(r.vector));
                        valid_len += read as u64;
                    }
                    (_, false) => torn = true,
                    (Err(e), true) => return Err(cache_err(format!("line {lineno}: {e}"))),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| cache_err(e.to_string()))?;
        if torn {
            file.set_len(valid_len).map_err(|e| cache_err(e.to_string()))?;
        }
        Ok(EmbeddingCache {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, model: &str, text: &str) -> Option<Arc<Vec<f64>>> {
        self.entries.read().get(&(model.to_string(), text_hash(text))).cloned()
    }

    pub fn insert(&self, model: &str, text: &str, vector: Vec<f64>) -> Result<Arc<Vec<f64>>, EmbeddingError> {
        let hash = text_hash(text);
        let mut writer = self.writer.lock();
        if let Some(existing) = self.entries.read().get(&(model.to_string(), hash.clone())) {
            return Ok(existing.clone());
        }
        if let Some(file) = writer.as_mut() {
            let record = CacheRecord { model: model.to_string(), hash: hash.clone(), vector };
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).and_then(|_| file.flush()).map_err(|e| EmbeddingError::Cache {
                path: self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                message: e.to_string(),
            })?;
            let vector = Arc::new(record.vector);
            self.entries.write().insert((model.to_string(), hash), vector.clone());
            return Ok(vector);
        }
        let vector = Arc::new(vector);
        self.entries.write().insert((model.to_string(), hash), vector.clone());
        Ok(vector)
    }
}

fn unit(mut v: Vec<f64>) -> Result<Vec<f64>, EmbeddingError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbeddingError::Malformed("non-finite component".into()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(EmbeddingError::Malformed("zero vector".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Remote sentence embeddings behind a write-through cache.
pub struct RemoteEmbedder {
    model: String,
    transport: Arc<dyn EmbeddingTransport>,
    cache: Arc<EmbeddingCache>,
    requests: AtomicUsize,
}

impl RemoteEmbedder {
    pub fn new(model: &str, transport: Arc<dyn EmbeddingTransport>, cache: Arc<EmbeddingCache>) -> Self {
        RemoteEmbedder { model: model.to_string(), transport, cache, requests: AtomicUsize::new(0) }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Number of requests sent to the service so far.
    pub fn requests_made(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    /// One unit vector per text. Only texts missing from the cache are sent,
    /// in a single batch.
    pub fn embed(&self, texts: &[&str]) -> Result<Vec<Arc<Vec<f64>>>, EmbeddingError> {
        let mut found: Vec<Option<Arc<Vec<f64>>>> = texts.iter().map(|t| self.cache.get(&self.model, t)).collect();
        let mut missing: Vec<&str> = Vec::new();
        for (t, v) in texts.iter().zip(&found) {
            if v.is_none() && !missing.contains(t) {
                missing.push(t);
            }
        }
        if !missing.is_empty() {
            self.requests.fetch_add(1, Ordering::Relaxed);
            let request =
                EmbedRequest { model: self.model.clone(), texts: missing.iter().map(|t| t.to_string()).collect() };
            let reply = self.transport.embed(&request)?;
            if reply.vectors.len() != missing.len() {
                return Err(EmbeddingError::Malformed(format!(
                    "{} vectors for {} texts",
                    reply.vectors.len(),
                    missing.len()
                )));
            }
            let dims = reply.vectors.first().map_or(0, Vec::len);
            for v in &reply.vectors {
                if v.len() != dims {
                    return Err(EmbeddingError::DimensionMismatch { expected: dims, found: v.len() });
                }
            }
            for (text, vector) in missing.into_iter().zip(reply.vectors) {
                let stored = self.cache.insert(&self.model, text, unit(vector)?)?;
                for (t, slot) in texts.iter().zip(found.iter_mut()) {
                    if *t == text {
                        *slot = Some(stored.clone());
                    }
                }
            }
        }
        let out: Vec<Arc<Vec<f64>>> = found.into_iter().map(|v| v.expect("every text resolved")).collect();
        if let Some(first) = out.first() {
            if let Some(bad) = out.iter().find(|v| v.len() != first.len()) {
                return Err(EmbeddingError::DimensionMismatch { expected: first.len(), found: bad.len() });
            }
        }
        Ok(out)
    }
}
