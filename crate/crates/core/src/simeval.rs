//! Similarity evaluation: Spearman's rho for graded similarity, average
//! precision for paraphrase classification, and the baseline-vs-augmented
//! benchmark driver.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusView, Document, Source};
use crate::decomposer::{decompose_corpus, DecomposeOptions, DecompositionCache, GenerationBackend, PromptConfig};
use crate::embedder::{augment_with, augmented_cosine, cosine, embed_batch, EmbeddingCache, EmbeddingProvider, Pooling};
use crate::error::{Error, Result};

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one side is constant".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman_rho(pred: &[f64], gold: &[f64]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::invalid("prediction and gold lengths differ"));
    }
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two pairs".into()));
    }
    if pred.iter().chain(gold).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    pearson(&average_ranks(pred), &average_ranks(gold))
}

/// Items ranked by descending score, ties broken by input position.
/// AP is the mean of precision@k over the ranks k that hold a positive.
pub fn average_precision(pred: &[f64], labels: &[bool]) -> Result<f64> {
    if pred.len() != labels.len() {
        return Err(Error::invalid("prediction and label lengths differ"));
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| pred[b].total_cmp(&pred[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Graded similarity scored with Spearman's rho.
    Sts,
    /// Binary paraphrase labels scored with average precision.
    Paraphrase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldPair {
    pub text_a: String,
    pub text_b: String,
    pub gold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsDataset {
    pub name: String,
    pub task: Task,
    pub pairs: Vec<GoldPair>,
}

#[derive(Deserialize)]
struct GoldRecord {
    text_a: String,
    text_b: String,
    score: Option<f64>,
    label: Option<f64>,
}

impl StsDataset {
    /// Loads `.jsonl` (one `{text_a, text_b, score|label}` object per line) or
    /// `.tsv` (header row naming `text_a`, `text_b` and `score` or `label`).
    pub fn load(path: &Path, name: &str) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_tsv = path.extension().is_some_and(|e| e == "tsv");
        let records = if is_tsv { parse_tsv(&raw)? } else { parse_jsonl(&raw)? };
        let task = match records.first() {
            Some((_, r)) if r.label.is_some() => Task::Paraphrase,
            Some(_) => Task::Sts,
            None => return Err(Error::invalid(format!("{} has no pairs", path.display()))),
        };
        let mut pairs = Vec::with_capacity(records.len());
        for (line, r) in records {
            let malformed = |reason: &str| Error::MalformedRecord {
                line,
                reason: reason.to_string(),
            };
            let gold = match task {
                Task::Paraphrase => match r.label {
                    Some(l) if l == 0.0 || l == 1.0 => l,
                    _ => return Err(malformed("label must be 0 or 1")),
                },
                Task::Sts => r.score.filter(|s| s.is_finite()).ok_or_else(|| malformed("missing score"))?,
            };
            if r.text_a.trim().is_empty() || r.text_b.trim().is_empty() {
                return Err(malformed("empty text"));
            }
            pairs.push(GoldPair {
                text_a: r.text_a,
                text_b: r.text_b,
                gold,
            });
        }
        Ok(Self {
            name: name.to_string(),
            task,
            pairs,
        })
    }
}

fn parse_jsonl(raw: &str) -> Result<Vec<(usize, GoldRecord)>> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| Error::MalformedRecord {
                    line: i + 1,
                    reason: e.to_string(),
                })
        })
        .collect()
}

fn parse_tsv(raw: &str) -> Result<Vec<(usize, GoldRecord)>> {
    let mut lines = raw.lines().enumerate();
    let header: Vec<&str> = lines
        .next()
        .map(|(_, h)| h.split('\t').map(str::trim).collect())
        .unwrap_or_default();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (a, b) = match (col("text_a"), col("text_b")) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::MalformedRecord {
                line: 1,
                reason: "header must name text_a and text_b".into(),
            })
        }
    };
    let (score, label) = (col("score"), col("label"));
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |reason: String| Error::MalformedRecord { line: i + 1, reason };
        let get = |c: usize| fields.get(c).copied().ok_or_else(|| bad(format!("missing column {}", c + 1)));
        let num = |c: Option<usize>| -> Result<Option<f64>> {
            match c {
                None => Ok(None),
                Some(c) => get(c)?.trim().parse::<f64>().map(Some).map_err(|e| bad(e.to_string())),
            }
        };
        out.push((
            i + 1,
            GoldRecord {
                text_a: get(a)?.to_string(),
                text_b: get(b)?.to_string(),
                score: num(score)?,
                label: num(label)?,
            },
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Augmented,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Augmented => "augmented",
        }
    }
}

/// Where augmented mode gets generations from.
pub enum GenerationSource<'a> {
    /// Generations keyed by item id (`<dataset>/<pair>/a|b`).
    Precomputed(&'a HashMap<String, Vec<String>>),
    /// Run the decomposer; with no backend only cached completions are used.
    Decompose {
        configs: &'a [PromptConfig],
        backend: Option<&'a dyn GenerationBackend>,
        cache: &'a DecompositionCache,
        options: &'a DecomposeOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub mode: Mode,
    pub metric: &'static str,
    pub value: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsReport {
    pub provider_id: String,
    pub rows: Vec<ReportRow>,
    /// Per-dataset predicted similarities, pair order.
    pub predictions: Vec<Vec<f64>>,
}

pub fn item_id(dataset: &str, pair: usize, side: char) -> String {
    format!("{dataset}/{pair}/{side}")
}

fn collect_generations(
    datasets: &[StsDataset],
    source: &GenerationSource<'_>,
) -> Result<HashMap<String, Vec<String>>> {
    let mut ids = Vec::new();
    let mut docs = Vec::new();
    for ds in datasets {
        for (p, pair) in ds.pairs.iter().enumerate() {
            for (side, text) in [('a', &pair.text_a), ('b', &pair.text_b)] {
                let id = item_id(&ds.name, p, side);
                ids.push(id.clone());
                docs.push(Document::new(id, text, Source::StsItem)?);
            }
        }
    }
    match source {
        GenerationSource::Precomputed(map) => {
            let missing: Vec<String> = ids.into_iter().filter(|id| !map.contains_key(id)).collect();
            if !missing.is_empty() {
                return Err(Error::MissingDecompositions(missing));
            }
            Ok((*map).clone())
        }
        GenerationSource::Decompose {
            configs,
            backend,
            cache,
            options,
        } => {
            let view = CorpusView::comments(&docs);
            let report = decompose_corpus(&view, configs, *backend, cache, options).map_err(|e| match e {
                Error::AllDocumentsFailed(_) => Error::MissingDecompositions(ids.clone()),
                other => other,
            })?;
            if !report.failures.is_empty() {
                return Err(Error::MissingDecompositions(
                    report.failures.into_iter().map(|(id, _)| id).collect(),
                ));
            }
            Ok(report
                .decompositions
                .into_iter()
                .map(|d| (d.parent_id, d.generations))
                .collect())
        }
    }
}

/// Scores every dataset in the given mode. Baseline mode never touches the
/// generation source.
pub fn run_sts_benchmark(
    datasets: &[StsDataset],
    mode: Mode,
    provider: &dyn EmbeddingProvider,
    embed_cache: &EmbeddingCache,
    source: Option<GenerationSource<'_>>,
    pooling: Pooling,
) -> Result<StsReport> {
    let generations = match mode {
        Mode::Baseline => HashMap::new(),
        Mode::Augmented => {
            let source = source.ok_or_else(|| Error::invalid("augmented mode needs a generation source"))?;
            collect_generations(datasets, &source)?
        }
    };
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for ds in datasets {
        let texts: Vec<String> = ds
            .pairs
            .iter()
            .flat_map(|p| [p.text_a.clone(), p.text_b.clone()])
            .collect();
        let base = embed_batch(&texts, provider, embed_cache, 64)?;
        let mut pred = Vec::with_capacity(ds.pairs.len());
        for (p, pair_vecs) in base.chunks(2).enumerate() {
            let score = match mode {
                Mode::Baseline => cosine(&pair_vecs[0].values, &pair_vecs[1].values)?,
                Mode::Augmented => {
                    let mut reps = Vec::with_capacity(2);
                    for (side, v) in ['a', 'b'].into_iter().zip(pair_vecs) {
                        let gens = &generations[&item_id(&ds.name, p, side)];
                        let gen_vecs = if gens.is_empty() {
                            Vec::new()
                        } else {
                            embed_batch(gens, provider, embed_cache, 64)?
                        };
                        reps.push(augment_with(v, &gen_vecs, pooling)?);
                    }
                    augmented_cosine(&reps[0], &reps[1])?
                }
            };
            pred.push(score);
        }
        let gold: Vec<f64> = ds.pairs.iter().map(|p| p.gold).collect();
        let (metric, value) = match ds.task {
            Task::Sts => ("spearman", spearman_rho(&pred, &gold)?),
            Task::Paraphrase => {
                let labels: Vec<bool> = gold.iter().map(|&g| g == 1.0).collect();
                ("average_precision", average_precision(&pred, &labels)?)
            }
        };
        rows.push(ReportRow {
            dataset: ds.name.clone(),
            mode,
            metric,
            value,
            n_pairs: ds.pairs.len(),
        });
        predictions.push(pred);
    }
    Ok(StsReport {
        provider_id: provider.id().to_string(),
        rows,
        predictions,
    })
}

/// CSV with columns `dataset,mode,metric,value,n_pairs`.
pub fn write_report_csv(rows: &[ReportRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "dataset,mode,metric,value,n_pairs")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.dataset, r.mode.as_str(), r.metric, r.value, r.n_pairs)?;
    }
    Ok(())
}

/// One comparison line, scores as percentages: `Twitter-PC 86.40 → 88.17`.
pub fn format_comparison(dataset: &str, baseline: f64, augmented: f64) -> String {
    format!("{dataset} {:.2} \u{2192} {:.2}", baseline * 100.0, augmented * 100.0)
}
