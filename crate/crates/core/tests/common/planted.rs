//! Two-topic corpus with disjoint vocabularies.
#![allow(dead_code)]

use infdecomp_core::topics::{top_words, TopicModelState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn vocab(prefix: &str) -> Vec<String> {
    (0..50).map(|i| format!("{prefix}{i:02}")).collect()
}

/// `per_topic` documents from each vocabulary ("alpha…" then "beta…"), as
/// (id, text, planted topic).
pub fn corpus(per_topic: usize, doc_len: usize, seed: u64) -> Vec<(String, String, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabs = [vocab("alpha"), vocab("beta")];
    let mut out = Vec::new();
    for (t, v) in vocabs.iter().enumerate() {
        for d in 0..per_topic {
            let words: Vec<&str> = (0..doc_len).map(|_| v[rng.gen_range(0..v.len())].as_str()).collect();
            out.push((format!("t{t}d{d:03}"), words.join(" "), t));
        }
    }
    out
}

/// Per fitted topic: (planted vocabulary it draws most top words from, share
/// of the top `n` words from that vocabulary).
pub fn topic_purity(state: &TopicModelState, n: usize) -> Vec<(usize, f64)> {
    (0..state.k_topics())
        .map(|k| {
            let (words, _) = top_words(state, k, n).unwrap();
            let alpha = words.iter().filter(|w| w.starts_with("alpha")).count();
            let beta = words.len() - alpha;
            if alpha >= beta {
                (0, alpha as f64 / words.len() as f64)
            } else {
                (1, beta as f64 / words.len() as f64)
            }
        })
        .collect()
}
