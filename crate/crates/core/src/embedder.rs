//! Embedding providers, the embedding cache, and augmented representations
//! (an utterance vector concatenated with the mean of its generation vectors).

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};
use crate::text::{fnv1a64, normalize, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider_id: impl Into<String>) -> Self {
        Self {
            values,
            provider_id: provider_id.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;

    /// One vector per input text, same order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Bag-of-words feature hashing: lowercase alphanumeric tokens, FNV-1a 64-bit
/// bucketed modulo the dimension, counts L2-normalized. A text with no tokens
/// falls into the bucket of the empty string.
#[derive(Debug)]
pub struct HashingProvider {
    dim: usize,
    id: String,
    calls: AtomicUsize,
}

impl Default for HashingProvider {
    fn default() -> Self {
        Self::new(256)
    }
}

impl HashingProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            id: format!("hashing-fnv1a-{dim}"),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a64(token.as_bytes()) % self.dim as u64) as usize
    }

    /// Unnormalized bucket counts.
    pub fn counts(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            v[self.bucket(token)] += 1.0;
            any = true;
        }
        if !any {
            v[self.bucket("")] = 1.0;
        }
        v
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = self.counts(text);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

impl EmbeddingProvider for HashingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
}

/// Remote encoder: `{texts}` in, `{vectors}` out. The dimension is taken from
/// the first reply and enforced afterwards.
#[derive(Debug)]
pub struct HttpEmbeddingProvider {
    client: JsonClient,
    id: String,
    dim: OnceLock<usize>,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: &str, provider_id: &str, token: Option<String>, retry: RetryPolicy) -> Self {
        Self {
            client: JsonClient::new(endpoint, token, retry, Duration::from_secs(120)),
            id: provider_id.to_string(),
            dim: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim.get().copied()
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let reply: EmbedReply = self.client.post(&EmbedBody { texts })?;
        if reply.vectors.len() != texts.len() {
            return Err(Error::Transport {
                attempts: 1,
                message: format!("expected {} vectors, got {}", texts.len(), reply.vectors.len()),
            });
        }
        for v in &reply.vectors {
            let expected = *self.dim.get_or_init(|| v.len());
            if v.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("provider returned a non-finite value".into()));
            }
        }
        Ok(reply.vectors)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EmbeddingRecord {
    provider_id: String,
    text_hash: String,
    vector: Vec<f64>,
}

/// JSONL embedding cache keyed by provider id and the hash of the normalized text.
#[derive(Debug)]
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<(String, String), Vec<f64>>>,
    writer: Mutex<Option<BufWriter<File>>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: Mutex::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<EmbeddingRecord>(&line) {
                    Ok(r) => {
                        entries.insert((r.provider_id, r.text_hash), r.vector);
                    }
                    Err(e) => log::warn!("{}:{}: ignoring corrupted embedding ({e})", path.display(), idx + 1),
                }
            }
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        let needs_newline = std::fs::read(path)
            .map(|b| b.last().is_some_and(|&c| c != b'\n'))
            .unwrap_or(false);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        if needs_newline {
            writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
            writer: Mutex::new(Some(writer)),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, provider_id: &str, text_hash: &str) -> Option<Vec<f64>> {
        self.entries
            .lock()
            .unwrap()
            .get(&(provider_id.to_string(), text_hash.to_string()))
            .cloned()
    }

    fn put(&self, provider_id: &str, text_hash: &str, vector: &[f64]) -> Result<()> {
        if let Some(w) = self.writer.lock().unwrap().as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new(""));
            let rec = EmbeddingRecord {
                provider_id: provider_id.to_string(),
                text_hash: text_hash.to_string(),
                vector: vector.to_vec(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec)?).map_err(|e| Error::io(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        self.entries
            .lock()
            .unwrap()
            .insert((provider_id.to_string(), text_hash.to_string()), vector.to_vec());
        Ok(())
    }
}

/// Embeds `texts` in order, serving repeats and cached texts without calling
/// the provider. Misses are sent in batches of `batch_size`.
pub fn embed_batch(
    texts: &[String],
    provider: &dyn EmbeddingProvider,
    cache: &EmbeddingCache,
    batch_size: usize,
) -> Result<Vec<EmbeddingVector>> {
    let pid = provider.id().to_string();
    let hashes: Vec<String> = texts
        .iter()
        .map(|t| {
            let n = normalize(t);
            if n.is_empty() {
                Err(Error::invalid("cannot embed an empty text"))
            } else {
                Ok(sha256_hex(n.as_bytes()))
            }
        })
        .collect::<Result<_>>()?;

    let mut pending: Vec<(String, String)> = Vec::new();
    let mut queued = std::collections::HashSet::new();
    for (text, hash) in texts.iter().zip(&hashes) {
        if cache.get(&pid, hash).is_none() && queued.insert(hash.clone()) {
            pending.push((normalize(text), hash.clone()));
        }
    }
    for (b, chunk) in pending.chunks(batch_size.max(1)).enumerate() {
        let batch: Vec<String> = chunk.iter().map(|(t, _)| t.clone()).collect();
        let vectors = provider.embed(&batch).map_err(|e| match e {
            Error::Transport { attempts, message } => Error::Transport {
                attempts,
                message: format!("embedding batch {b} ({} texts): {message}", batch.len()),
            },
            other => other,
        })?;
        for ((_, hash), v) in chunk.iter().zip(vectors) {
            cache.put(&pid, hash, &v)?;
        }
    }

    let mut out = Vec::with_capacity(texts.len());
    let mut dim = None;
    for hash in &hashes {
        let values = cache
            .get(&pid, hash)
            .ok_or_else(|| Error::Numerical("embedding missing after provider call".into()))?;
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        out.push(EmbeddingVector::new(values, pid.clone()));
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a·b / sqrt(|a|²|b|²)`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let denom = (dot(a, a) * dot(b, b)).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((dot(a, b) / denom).clamp(-1.0, 1.0))
}

/// How generation vectors are pooled into the second half of the representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRepresentation {
    pub base: EmbeddingVector,
    pub decomposition_mean: EmbeddingVector,
}

impl AugmentedRepresentation {
    pub fn concatenated(&self) -> Vec<f64> {
        let mut v = self.base.values.clone();
        v.extend_from_slice(&self.decomposition_mean.values);
        v
    }
}

/// Pairs an utterance vector with the pooled vectors of its generations.
/// An empty generation list duplicates the base vector.
pub fn augment(doc: &EmbeddingVector, gens: &[EmbeddingVector]) -> Result<AugmentedRepresentation> {
    augment_with(doc, gens, Pooling::Mean)
}

pub fn augment_with(
    doc: &EmbeddingVector,
    gens: &[EmbeddingVector],
    pooling: Pooling,
) -> Result<AugmentedRepresentation> {
    let d = doc.dim();
    for g in gens {
        if g.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.dim(),
            });
        }
        if g.provider_id != doc.provider_id {
            return Err(Error::invalid(format!(
                "mixed providers {} and {}",
                doc.provider_id, g.provider_id
            )));
        }
    }
    if gens.is_empty() {
        return Ok(AugmentedRepresentation {
            base: doc.clone(),
            decomposition_mean: doc.clone(),
        });
    }
    let mut pooled = vec![0.0; d];
    for g in gens {
        for (p, x) in pooled.iter_mut().zip(&g.values) {
            *p += x;
        }
    }
    if pooling == Pooling::Mean {
        let n = gens.len() as f64;
        pooled.iter_mut().for_each(|p| *p /= n);
    }
    Ok(AugmentedRepresentation {
        base: doc.clone(),
        decomposition_mean: EmbeddingVector::new(pooled, doc.provider_id.clone()),
    })
}

/// Cosine of the 2d-dimensional concatenations. Accumulated as
/// `(a·b + m_a·m_b) / sqrt((|a|²+|m_a|²)(|b|²+|m_b|²))`, so a duplicated
/// representation reproduces the base cosine bit for bit.
pub fn augmented_cosine(x: &AugmentedRepresentation, y: &AugmentedRepresentation) -> Result<f64> {
    let d = x.base.dim();
    for v in [&x.decomposition_mean, &y.base, &y.decomposition_mean] {
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
    }
    let (a, ma, b, mb) = (
        &x.base.values,
        &x.decomposition_mean.values,
        &y.base.values,
        &y.decomposition_mean.values,
    );
    let num = dot(a, b) + dot(ma, mb);
    let denom = ((dot(a, a) + dot(ma, ma)) * (dot(b, b) + dot(mb, mb))).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((num / denom).clamp(-1.0, 1.0))
}
