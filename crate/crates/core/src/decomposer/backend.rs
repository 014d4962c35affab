use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::split_text;
use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};
use crate::text::{normalize, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub template_id: String,
    pub exemplar_ids: Vec<String>,
    pub model_id: String,
    pub sampling: Sampling,
    pub input_text: String,
    /// Rendered prompt sent to remote backends.
    pub prompt: String,
}

#[derive(Serialize)]
struct FingerprintKey<'a> {
    template_id: &'a str,
    exemplar_ids: &'a [String],
    model_id: &'a str,
    temperature: f64,
    max_tokens: u32,
    input_text: String,
}

impl GenerationRequest {
    /// SHA-256 over every field that determines the completion except the
    /// rendered prompt, which is itself a function of those fields.
    pub fn fingerprint(&self) -> String {
        let key = FingerprintKey {
            template_id: &self.template_id,
            exemplar_ids: &self.exemplar_ids,
            model_id: &self.model_id,
            temperature: self.sampling.temperature,
            max_tokens: self.sampling.max_tokens,
            input_text: normalize(&self.input_text),
        };
        let bytes = serde_json::to_vec(&key).expect("fingerprint key serializes");
        sha256_hex(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.exemplar_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("exemplar id {dup} repeated in request")));
        }
        if self.sampling.temperature < 0.0 || self.sampling.max_tokens == 0 {
            return Err(Error::invalid("temperature must be >= 0 and max_tokens positive"));
        }
        Ok(())
    }
}

pub trait GenerationBackend: Send + Sync {
    fn model_id(&self) -> &str;

    /// Raw completion text for the request.
    fn complete(&self, req: &GenerationRequest) -> Result<String>;
}

/// Calls the backend and rejects blank completions.
pub fn generate(req: &GenerationRequest, backend: &dyn GenerationBackend) -> Result<String> {
    req.validate()?;
    let raw = backend.complete(req)?;
    if raw.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    Ok(raw)
}

/// Offline stand-in for a language model. Splits the input into sentences and
/// then at the connectives "and", "because" and "but", emitting one
/// re-capitalized clause per line.
#[derive(Debug, Default)]
pub struct MockBackend {
    calls: AtomicUsize,
}

pub const MOCK_MODEL_ID: &str = "mock-decomposer-v1";

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

const CONNECTIVES: &[&str] = &["and", "because", "but"];

fn finish_clause(words: &[&str]) -> Option<String> {
    let joined = words.join(" ");
    let trimmed = joined.trim_matches(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':'));
    if !trimmed.chars().any(char::is_alphanumeric) {
        return None;
    }
    let lower = trimmed.to_lowercase();
    let mut chars = lower.chars();
    let first = chars.next()?;
    let mut clause: String = first.to_uppercase().chain(chars).collect();
    if !clause.ends_with(['.', '!', '?']) {
        clause.push('.');
    }
    Some(clause)
}

pub fn mock_decompose(input: &str) -> String {
    let mut clauses = Vec::new();
    for sentence in split_text(&normalize(input)) {
        let mut current: Vec<&str> = Vec::new();
        for word in sentence.split_whitespace() {
            if CONNECTIVES.contains(&word.to_lowercase().as_str()) {
                clauses.extend(finish_clause(&current));
                current.clear();
            } else {
                current.push(word);
            }
        }
        clauses.extend(finish_clause(&current));
    }
    clauses.join("\n")
}

impl GenerationBackend for MockBackend {
    fn model_id(&self) -> &str {
        MOCK_MODEL_ID
    }

    fn complete(&self, req: &GenerationRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(mock_decompose(&req.input_text))
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionReply {
    text: String,
}

/// Remote completion endpoint: `{model, prompt, temperature, max_tokens}` in,
/// `{text}` out.
#[derive(Debug)]
pub struct HttpBackend {
    client: JsonClient,
    model: String,
    calls: AtomicUsize,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, token: Option<String>, retry: RetryPolicy) -> Self {
        Self {
            client: JsonClient::new(endpoint, token, retry, Duration::from_secs(120)),
            model: model.to_string(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GenerationBackend for HttpBackend {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, req: &GenerationRequest) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let body = CompletionBody {
            model: &self.model,
            prompt: &req.prompt,
            temperature: req.sampling.temperature,
            max_tokens: req.sampling.max_tokens,
        };
        let reply: CompletionReply = self.client.post(&body)?;
        Ok(reply.text)
    }
}
