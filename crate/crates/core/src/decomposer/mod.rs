//! Prompted inferential decomposition: prompt assembly, generation backends,
//! response parsing and the fingerprint-keyed completion cache.
//!
//! A document may be decomposed under several prompt configurations; their
//! parsed generations are unioned (in configuration order) before dedup.

mod backend;
mod cache;
mod parse;
mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use backend::{
    generate, mock_decompose, GenerationBackend, GenerationRequest, HttpBackend, MockBackend, Sampling,
    MOCK_MODEL_ID,
};
pub use cache::{CacheEntry, DecompositionCache};
pub use parse::parse_generations;
pub use prompt::{
    build_prompt, load_exemplars, load_template, render_prompt, sample_exemplars, Exemplar, PromptTemplate,
};

use crate::corpus::{CorpusView, ViewItem, ViewKind};
use crate::error::{Error, Result};
use crate::text::sha256_hex;

/// The generations produced for one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub parent_id: String,
    pub generations: Vec<String>,
    pub request_fingerprint: String,
}

/// One prompt configuration: a template with `k` exemplars drawn under `seed`.
#[derive(Debug, Clone)]
pub struct PromptConfig {
    pub template: PromptTemplate,
    pub exemplars: Vec<Exemplar>,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub sampling: Sampling,
    /// Maximum backend calls in flight.
    pub concurrency: usize,
    /// Used when no backend is supplied (cache-only runs).
    pub model_id: String,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            sampling: Sampling::default(),
            concurrency: 4,
            model_id: MOCK_MODEL_ID.to_string(),
        }
    }
}

#[derive(Debug)]
pub struct DecomposeReport {
    /// Sorted by parent id.
    pub decompositions: Vec<Decomposition>,
    pub failures: Vec<(String, Error)>,
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub total_generations: usize,
}

impl DecomposeReport {
    pub fn mean_generations(&self) -> f64 {
        if self.decompositions.is_empty() {
            0.0
        } else {
            self.total_generations as f64 / self.decompositions.len() as f64
        }
    }
}

struct PreparedConfig<'a> {
    template: &'a PromptTemplate,
    chosen: Vec<&'a Exemplar>,
    exemplar_ids: Vec<String>,
}

struct Counters {
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

fn decompose_item(
    item: &ViewItem,
    configs: &[PreparedConfig<'_>],
    backend: Option<&dyn GenerationBackend>,
    cache: &DecompositionCache,
    opts: &DecomposeOptions,
    counters: &Counters,
) -> Result<Decomposition> {
    let model_id = backend.map_or(opts.model_id.as_str(), |b| b.model_id());
    let mut fingerprints = Vec::with_capacity(configs.len());
    let mut union = Vec::new();
    for cfg in configs {
        let req = GenerationRequest {
            template_id: cfg.template.template_id.clone(),
            exemplar_ids: cfg.exemplar_ids.clone(),
            model_id: model_id.to_string(),
            sampling: opts.sampling,
            input_text: item.text.clone(),
            prompt: render_prompt(cfg.template, &cfg.chosen, &item.text)?,
        };
        let fp = req.fingerprint();
        let generations = match cache.get(&fp) {
            Some(entry) => {
                counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                entry.generations
            }
            None => {
                let backend = backend.ok_or_else(|| {
                    Error::MissingDecompositions(vec![item.item_id.clone()])
                })?;
                counters.backend_calls.fetch_add(1, Ordering::SeqCst);
                let raw = generate(&req, backend)?;
                let parsed = parse_generations(&raw)?;
                cache.put(CacheEntry::new(fp.clone(), raw, parsed.clone()))?;
                parsed
            }
        };
        union.extend(generations);
        fingerprints.push(fp);
    }
    let request_fingerprint = if fingerprints.len() == 1 {
        fingerprints.pop().unwrap_or_default()
    } else {
        sha256_hex(fingerprints.join(",").as_bytes())
    };
    Ok(Decomposition {
        parent_id: item.item_id.clone(),
        generations: parse::dedup(union),
        request_fingerprint,
    })
}

/// Decomposes every item of a comments-kind view. The cache is consulted
/// before the backend; new completions are appended to it. With no backend,
/// cache misses are reported as per-document failures. The run fails only
/// when every document fails.
pub fn decompose_corpus(
    view: &CorpusView,
    configs: &[PromptConfig],
    backend: Option<&dyn GenerationBackend>,
    cache: &DecompositionCache,
    opts: &DecomposeOptions,
) -> Result<DecomposeReport> {
    if view.kind != ViewKind::Comments {
        return Err(Error::invalid(format!(
            "decomposition runs over utterances, not the {} view",
            view.kind.as_str()
        )));
    }
    if configs.is_empty() {
        return Err(Error::invalid("at least one prompt configuration is required"));
    }
    let prepared = configs
        .iter()
        .map(|c| {
            c.template.validate(c.k)?;
            let chosen = sample_exemplars(&c.exemplars, c.k, c.seed)?;
            let exemplar_ids = chosen.iter().map(|e| e.exemplar_id.clone()).collect();
            Ok(PreparedConfig {
                template: &c.template,
                chosen,
                exemplar_ids,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let counters = Counters {
        backend_calls: AtomicUsize::new(0),
        cache_hits: AtomicUsize::new(0),
    };
    let results: Mutex<Vec<(usize, Result<Decomposition>)>> = Mutex::new(Vec::with_capacity(view.len()));
    let next = AtomicUsize::new(0);
    let workers = opts.concurrency.clamp(1, view.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = view.items.get(i) else { break };
                let res = decompose_item(item, &prepared, backend, cache, opts, &counters);
                results.lock().unwrap().push((i, res));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(i, _)| *i);
    let mut decompositions = Vec::new();
    let mut failures = Vec::new();
    for (i, res) in results {
        match res {
            Ok(d) => decompositions.push(d),
            Err(e) => {
                log::warn!("decomposition failed for {}: {e}", view.items[i].item_id);
                failures.push((view.items[i].item_id.clone(), e));
            }
        }
    }
    if decompositions.is_empty() && !failures.is_empty() {
        return Err(Error::AllDocumentsFailed(failures.len()));
    }
    decompositions.sort_by(|a, b| a.parent_id.cmp(&b.parent_id));
    failures.sort_by(|a, b| a.0.cmp(&b.0));
    let total_generations = decompositions.iter().map(|d| d.generations.len()).sum();
    Ok(DecomposeReport {
        decompositions,
        failures,
        backend_calls: counters.backend_calls.into_inner(),
        cache_hits: counters.cache_hits.into_inner(),
        total_generations,
    })
}
