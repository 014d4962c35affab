//! Collapsed Gibbs sampling for latent Dirichlet allocation, used to route
//! tweets to human-labeled, ideology-relevant topics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "being", "but", "by", "can", "could", "did", "do", "does", "doing", "for", "from", "had", "has", "have",
    "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "just", "me", "more", "most", "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "rt", "amp", "same", "she", "should", "so", "some", "such",
    "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
];

/// Lowercases, drops URLs and @mentions, keeps hashtag words without `#`,
/// splits on non-alphanumerics, and drops stopwords and 1-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.") {
            continue;
        }
        if lower.trim_start_matches(|c: char| !c.is_alphanumeric() && c != '@').starts_with('@') {
            continue;
        }
        for tok in lower.split(|c: char| !c.is_alphanumeric()) {
            if tok.chars().count() >= 2 && !STOPWORDS.contains(&tok) {
                out.push(tok.to_string());
            }
        }
    }
    out
}

/// Documents as vocabulary indices. The vocabulary is sorted, so index order
/// is token order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    pub doc_ids: Vec<String>,
    pub docs: Vec<Vec<usize>>,
    pub vocab: Vec<String>,
    /// Documents left with no tokens after preprocessing.
    pub excluded: Vec<String>,
}

impl TokenizedCorpus {
    /// Tokenizes, then drops tokens occurring fewer than `min_count` times.
    pub fn build<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str)>, min_count: usize) -> Self {
        let tokenized: Vec<(String, Vec<String>)> = docs
            .into_iter()
            .map(|(id, text)| (id.to_string(), tokenize(text)))
            .collect();
        Self::from_tokens(tokenized, min_count)
    }

    pub fn from_tokens(tokenized: Vec<(String, Vec<String>)>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, toks) in &tokenized {
            for t in toks {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let vocab: Vec<String> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, _)| t.to_string())
            .collect();
        let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut corpus = Self {
            doc_ids: Vec::new(),
            docs: Vec::new(),
            vocab: Vec::new(),
            excluded: Vec::new(),
        };
        for (id, toks) in &tokenized {
            let ids: Vec<usize> = toks.iter().filter_map(|t| index.get(t.as_str()).copied()).collect();
            if ids.is_empty() {
                corpus.excluded.push(id.clone());
            } else {
                corpus.doc_ids.push(id.clone());
                corpus.docs.push(ids);
            }
        }
        corpus.vocab = vocab;
        corpus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self {
            k_topics: 50,
            alpha: 0.1,
            beta: 0.01,
            iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModelState {
    pub params: LdaParams,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    /// D × K
    pub doc_topic: Vec<Vec<u32>>,
    /// K × V
    pub topic_word: Vec<Vec<u32>>,
    pub topic_totals: Vec<u32>,
    pub doc_lengths: Vec<u32>,
    /// Topic of every token, per document.
    pub assignments: Vec<Vec<usize>>,
    doc_index: HashMap<String, usize>,
}

impl TopicModelState {
    pub fn k_topics(&self) -> usize {
        self.params.k_topics
    }

    /// Exact conservation of the count matrices.
    pub fn counts_consistent(&self) -> bool {
        let k = self.k_topics();
        let docs_ok = self.doc_topic.iter().zip(&self.doc_lengths).all(|(row, &len)| row.iter().sum::<u32>() == len);
        let topics_ok = (0..k).all(|t| self.topic_word[t].iter().sum::<u32>() == self.topic_totals[t]);
        let assign_ok = self.assignments.iter().enumerate().all(|(d, z)| {
            (0..k).all(|t| z.iter().filter(|&&x| x == t).count() as u32 == self.doc_topic[d][t])
        });
        docs_ok && topics_ok && assign_ok
    }

    pub fn doc_position(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }
}

/// Collapsed Gibbs sampler; one call to [`LdaSampler::sweep`] resamples every token once.
pub struct LdaSampler<'a> {
    corpus: &'a TokenizedCorpus,
    state: TopicModelState,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'a> LdaSampler<'a> {
    pub fn new(corpus: &'a TokenizedCorpus, params: LdaParams) -> Result<Self> {
        if corpus.vocab.is_empty() || corpus.docs.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if params.k_topics == 0 || params.alpha <= 0.0 || params.beta <= 0.0 {
            return Err(Error::invalid("LDA needs K >= 1 and positive priors"));
        }
        let (k, v) = (params.k_topics, corpus.vocab.len());
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut doc_topic = vec![vec![0u32; k]; corpus.docs.len()];
        let mut topic_word = vec![vec![0u32; v]; k];
        let mut topic_totals = vec![0u32; k];
        let mut assignments = Vec::with_capacity(corpus.docs.len());
        for (d, doc) in corpus.docs.iter().enumerate() {
            let z: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..k)).collect();
            for (&w, &t) in doc.iter().zip(&z) {
                doc_topic[d][t] += 1;
                topic_word[t][w] += 1;
                topic_totals[t] += 1;
            }
            assignments.push(z);
        }
        let state = TopicModelState {
            params,
            vocab: corpus.vocab.clone(),
            doc_ids: corpus.doc_ids.clone(),
            doc_topic,
            topic_word,
            topic_totals,
            doc_lengths: corpus.docs.iter().map(|d| d.len() as u32).collect(),
            assignments,
            doc_index: corpus.doc_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect(),
        };
        Ok(Self {
            corpus,
            state,
            rng,
            weights: vec![0.0; k],
        })
    }

    pub fn sweep(&mut self) {
        let s = &mut self.state;
        let (alpha, beta) = (s.params.alpha, s.params.beta);
        let v_beta = s.vocab.len() as f64 * beta;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = s.assignments[d][pos];
                s.doc_topic[d][old] -= 1;
                s.topic_word[old][w] -= 1;
                s.topic_totals[old] -= 1;

                let mut total = 0.0;
                for (t, weight) in self.weights.iter_mut().enumerate() {
                    *weight = (f64::from(s.doc_topic[d][t]) + alpha) * (f64::from(s.topic_word[t][w]) + beta)
                        / (f64::from(s.topic_totals[t]) + v_beta);
                    total += *weight;
                }
                let mut u = self.rng.gen::<f64>() * total;
                let mut new = self.weights.len() - 1;
                for (t, &weight) in self.weights.iter().enumerate() {
                    if u < weight {
                        new = t;
                        break;
                    }
                    u -= weight;
                }

                s.assignments[d][pos] = new;
                s.doc_topic[d][new] += 1;
                s.topic_word[new][w] += 1;
                s.topic_totals[new] += 1;
            }
        }
    }

    pub fn state(&self) -> &TopicModelState {
        &self.state
    }

    pub fn into_state(self) -> TopicModelState {
        self.state
    }
}

pub fn fit_lda(corpus: &TokenizedCorpus, params: LdaParams) -> Result<TopicModelState> {
    let mut sampler = LdaSampler::new(corpus, params)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_state())
}

/// θ_dk = (N_dk + α) / (len_d + Kα).
pub fn doc_topic_distribution(state: &TopicModelState, doc_id: &str) -> Result<Vec<f64>> {
    let d = state
        .doc_position(doc_id)
        .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
    Ok(theta_row(state, d))
}

fn theta_row(state: &TopicModelState, d: usize) -> Vec<f64> {
    let k = state.k_topics() as f64;
    let alpha = state.params.alpha;
    let denom = f64::from(state.doc_lengths[d]) + k * alpha;
    state.doc_topic[d].iter().map(|&n| (f64::from(n) + alpha) / denom).collect()
}

/// Highest-probability words of a topic, ties by token order. Asking for more
/// words than the vocabulary holds returns the whole vocabulary and a warning.
pub fn top_words(state: &TopicModelState, topic: usize, n: usize) -> Result<(Vec<String>, Option<String>)> {
    if topic >= state.k_topics() {
        return Err(Error::invalid(format!("topic {topic} out of range")));
    }
    let v = state.vocab.len();
    let warning = (n > v).then(|| format!("requested {n} words but vocabulary has {v}; truncated"));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let beta = state.params.beta;
    let denom = f64::from(state.topic_totals[topic]) + v as f64 * beta;
    let prob = |w: usize| (f64::from(state.topic_word[topic][w]) + beta) / denom;
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| prob(b).total_cmp(&prob(a)).then(a.cmp(&b)));
    Ok((order.into_iter().take(n.min(v)).map(|w| state.vocab[w].clone()).collect(), warning))
}

/// Topics judged relevant, with their human-supplied labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TopicSelection {
    pub topic_ids: BTreeSet<usize>,
    pub labels: BTreeMap<usize, String>,
}

impl TopicSelection {
    pub fn new(labels: BTreeMap<usize, String>) -> Self {
        Self {
            topic_ids: labels.keys().copied().collect(),
            labels,
        }
    }

    /// JSON object `{"<topic_id>": "<label>", ...}`.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&raw)?;
        let mut labels = BTreeMap::new();
        for (k, v) in map {
            let id: usize = k
                .parse()
                .map_err(|_| Error::invalid(format!("topic id {k:?} is not an integer")))?;
            labels.insert(id, v);
        }
        Ok(Self::new(labels))
    }

    pub fn validate(&self, k_topics: usize) -> Result<()> {
        match self.topic_ids.iter().find(|&&t| t >= k_topics) {
            Some(t) => Err(Error::invalid(format!("selected topic {t} outside [0, {k_topics})"))),
            None => Ok(()),
        }
    }
}

pub type TweetSelections = BTreeMap<(String, usize), Vec<String>>;

/// For each legislator and selected topic, the tweets with θ_topic at or above
/// `threshold`, highest θ first (ties keep input order), at most `m` of them.
/// Tweets excluded from the model are ignored.
pub fn select_top_tweets(
    state: &TopicModelState,
    selection: &TopicSelection,
    tweets_by_legislator: &BTreeMap<String, Vec<String>>,
    threshold: f64,
    m: usize,
) -> Result<TweetSelections> {
    if !(threshold > 0.0 && threshold <= 1.0) || m == 0 {
        return Err(Error::invalid("threshold must lie in (0, 1] and m >= 1"));
    }
    selection.validate(state.k_topics())?;
    let mut out = BTreeMap::new();
    for (legislator, tweets) in tweets_by_legislator {
        let thetas: Vec<(&String, Vec<f64>)> = tweets
            .iter()
            .filter_map(|id| state.doc_position(id).map(|d| (id, theta_row(state, d))))
            .collect();
        for &topic in &selection.topic_ids {
            let mut picked: Vec<(&String, f64)> = thetas
                .iter()
                .map(|(id, th)| (*id, th[topic]))
                .filter(|(_, p)| *p >= threshold)
                .collect();
            picked.sort_by(|a, b| b.1.total_cmp(&a.1));
            picked.truncate(m);
            out.insert(
                (legislator.clone(), topic),
                picked.into_iter().map(|(id, _)| id.clone()).collect(),
            );
        }
    }
    Ok(out)
}
