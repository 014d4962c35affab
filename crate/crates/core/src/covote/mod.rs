//! Co-vote responses, text-similarity features and the coefficient report.

pub mod lmm;
pub mod sim;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedder::cosine;
use crate::error::{Error, Result};
use crate::topics::TweetSelections;

pub use lmm::{
    bic, bic_compare, fit_lmm, fit_problem, Coefficient, GlsSolution, LmmOptions, LmmProblem, ModelFit,
    VarianceComponents, INTERCEPT,
};

pub const SAME_PARTY: &str = "same_party";
pub const SIM_UTTERANCES: &str = "sim_utterances";
pub const SIM_DECOMPOSITIONS: &str = "sim_decompositions";
pub const FEATURE_NAMES: [&str; 3] = [SAME_PARTY, SIM_UTTERANCES, SIM_DECOMPOSITIONS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Yea,
    Nay,
    Other,
}

impl Position {
    pub fn parse(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "yea" | "yes" | "aye" | "y" => Position::Yea,
            "nay" | "no" | "n" => Position::Nay,
            _ => Position::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub legislator_id: String,
    pub vote_id: String,
    pub position: Position,
}

/// Votes keyed by legislator, then roll call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoteTable {
    by_legislator: BTreeMap<String, BTreeMap<String, Position>>,
}

impl VoteTable {
    pub fn from_records(records: impl IntoIterator<Item = VoteRecord>) -> Result<Self> {
        let mut by_legislator: BTreeMap<String, BTreeMap<String, Position>> = BTreeMap::new();
        for r in records {
            let votes = by_legislator.entry(r.legislator_id.clone()).or_default();
            if votes.insert(r.vote_id.clone(), r.position).is_some() {
                return Err(Error::DuplicateId(format!("{}/{}", r.legislator_id, r.vote_id)));
            }
        }
        Ok(Self { by_legislator })
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            legislator_id: String,
            vote_id: String,
            position: String,
        }
        let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut records = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::MalformedRecord {
                line: i + 2,
                reason: e.to_string(),
            })?;
            records.push(VoteRecord {
                legislator_id: row.legislator_id.trim().to_string(),
                vote_id: row.vote_id.trim().to_string(),
                position: Position::parse(&row.position),
            });
        }
        Self::from_records(records)
    }

    pub fn legislators(&self) -> impl Iterator<Item = &str> {
        self.by_legislator.keys().map(String::as_str)
    }

    pub fn votes(&self, legislator: &str) -> Option<&BTreeMap<String, Position>> {
        self.by_legislator.get(legislator)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedRecord {
            line: 0,
            reason: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legislator {
    pub legislator_id: String,
    pub party: String,
    pub state: String,
}

pub fn load_legislators(path: &Path) -> Result<BTreeMap<String, Legislator>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = BTreeMap::new();
    for (i, row) in rdr.deserialize::<Legislator>().enumerate() {
        let row = row.map_err(|e| Error::MalformedRecord {
            line: i + 2,
            reason: e.to_string(),
        })?;
        if out.contains_key(&row.legislator_id) {
            return Err(Error::DuplicateId(row.legislator_id));
        }
        out.insert(row.legislator_id.clone(), row);
    }
    Ok(out)
}

/// Agreement rate over roll calls where both cast yea or nay. `None` when
/// they share no such roll call.
pub fn covote_rate(votes_i: &BTreeMap<String, Position>, votes_j: &BTreeMap<String, Position>) -> Option<(f64, usize)> {
    let mut n_common = 0usize;
    let mut matches = 0usize;
    for (vote, pi) in votes_i {
        if *pi == Position::Other {
            continue;
        }
        match votes_j.get(vote) {
            Some(pj) if *pj != Position::Other => {
                n_common += 1;
                if pi == pj {
                    matches += 1;
                }
            }
            _ => {}
        }
    }
    (n_common > 0).then(|| (matches as f64 / n_common as f64, n_common))
}

/// Log-odds of λ after clamping to [ε, 1−ε], ε = 0.5/n_common.
pub fn logit_response(lambda: f64, n_common: usize) -> f64 {
    let n = n_common.max(1) as f64;
    let eps = 0.5 / n;
    let l = lambda.clamp(eps, 1.0 - eps);
    (l / (1.0 - l)).ln()
}

/// Linear-interpolation percentile (index p/100·(n−1) into the sorted values).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = p / 100.0 * (v.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

/// The `p`-th percentile of all cross-list cosines. `Ok(None)` when either
/// list is empty.
pub fn pair_similarity(emb_i: &[Vec<f64>], emb_j: &[Vec<f64>], p: f64) -> Result<Option<f64>> {
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::invalid(format!("percentile {p} outside [0, 100]")));
    }
    if emb_i.is_empty() || emb_j.is_empty() {
        return Ok(None);
    }
    let mut sims = Vec::with_capacity(emb_i.len() * emb_j.len());
    for a in emb_i {
        for b in emb_j {
            sims.push(cosine(a, b)?);
        }
    }
    Ok(percentile(&sims, p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovoteObservation {
    /// First member under canonical id order; indexes the slot-a effect.
    pub leg_a: String,
    pub leg_b: String,
    pub lambda: f64,
    pub n_common: usize,
    pub response: f64,
    pub features: BTreeMap<String, f64>,
}

impl CovoteObservation {
    pub fn new(leg_i: &str, leg_j: &str, lambda: f64, n_common: usize, features: BTreeMap<String, f64>) -> Self {
        let (a, b) = if leg_i <= leg_j { (leg_i, leg_j) } else { (leg_j, leg_i) };
        Self {
            leg_a: a.to_string(),
            leg_b: b.to_string(),
            lambda,
            n_common,
            response: logit_response(lambda, n_common),
            features,
        }
    }
}

/// Text inputs for feature construction.
pub struct FeatureInputs<'a> {
    /// Per (legislator, topic): the selected tweet ids.
    pub selections: &'a TweetSelections,
    pub tweet_embeddings: &'a HashMap<String, Vec<f64>>,
    /// Per tweet id: embeddings of its generations.
    pub generation_embeddings: &'a HashMap<String, Vec<Vec<f64>>>,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPair {
    pub leg_a: String,
    pub leg_b: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub observations: Vec<CovoteObservation>,
    pub dropped: Vec<DroppedPair>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per topic: (topic id, tweet embeddings, generation embeddings).
type TopicEmbeddings = (usize, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Builds one observation per legislator pair with votes in common and at
/// least one topic both have text for.
pub fn build_features(
    votes: &VoteTable,
    legislators: &BTreeMap<String, Legislator>,
    inputs: &FeatureInputs<'_>,
) -> Result<FeatureReport> {
    let mut topics_by_leg: BTreeMap<&str, Vec<TopicEmbeddings>> = BTreeMap::new();
    for ((leg, topic), tweets) in inputs.selections {
        let mut utt = Vec::new();
        let mut gens = Vec::new();
        for t in tweets {
            let e = inputs
                .tweet_embeddings
                .get(t)
                .ok_or_else(|| Error::UnknownDocument(t.clone()))?;
            utt.push(e.clone());
            if let Some(g) = inputs.generation_embeddings.get(t) {
                gens.extend(g.iter().cloned());
            }
        }
        topics_by_leg.entry(leg.as_str()).or_default().push((*topic, utt, gens));
    }

    let ids: Vec<&str> = legislators
        .keys()
        .map(String::as_str)
        .filter(|id| votes.votes(id).is_some())
        .collect();
    let empty = Vec::new();
    let mut observations = Vec::new();
    let mut dropped = Vec::new();
    for (x, &a) in ids.iter().enumerate() {
        for &b in &ids[x + 1..] {
            let drop = |reason: &str| DroppedPair {
                leg_a: a.to_string(),
                leg_b: b.to_string(),
                reason: reason.to_string(),
            };
            let Some((lambda, n_common)) = covote_rate(votes.votes(a).unwrap(), votes.votes(b).unwrap()) else {
                dropped.push(drop("no yea/nay votes in common"));
                continue;
            };
            let ta = topics_by_leg.get(a).unwrap_or(&empty);
            let tb = topics_by_leg.get(b).unwrap_or(&empty);
            let mut sim_u = Vec::new();
            let mut sim_d = Vec::new();
            for (topic, ua, ga) in ta {
                let Some((_, ub, gb)) = tb.iter().find(|(t, _, _)| t == topic) else {
                    continue;
                };
                if let Some(s) = pair_similarity(ua, ub, inputs.percentile)? {
                    sim_u.push(s);
                }
                if let Some(s) = pair_similarity(ga, gb, inputs.percentile)? {
                    sim_d.push(s);
                }
            }
            let (Some(su), Some(sd)) = (mean(&sim_u), mean(&sim_d)) else {
                dropped.push(drop("no topic with text for both legislators"));
                continue;
            };
            let same = (legislators[a].party == legislators[b].party) as u8 as f64;
            let features = BTreeMap::from([
                (SAME_PARTY.to_string(), same),
                (SIM_UTTERANCES.to_string(), su),
                (SIM_DECOMPOSITIONS.to_string(), sd),
            ]);
            observations.push(CovoteObservation::new(a, b, lambda, n_common, features));
        }
    }
    if observations.is_empty() {
        return Err(Error::NoUsablePairs);
    }
    for d in &dropped {
        log::warn!("dropping pair {}/{}: {}", d.leg_a, d.leg_b, d.reason);
    }
    Ok(FeatureReport { observations, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub covariate: String,
    pub beta: f64,
    pub se: f64,
    /// BIC(without this covariate) − BIC(full); absent for the intercept.
    pub delta_bic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub full: ModelFit,
    pub rows: Vec<CoefficientRow>,
}

/// Fits the full model and one reduced model per feature.
pub fn coefficient_table(obs: &[CovoteObservation], feature_names: &[&str], opts: &LmmOptions) -> Result<CoefficientTable> {
    let full = fit_lmm(obs, feature_names, opts)?;
    let mut rows = Vec::new();
    for c in &full.beta {
        let delta_bic = if c.name == INTERCEPT {
            None
        } else {
            let reduced_names: Vec<&str> = feature_names.iter().copied().filter(|n| *n != c.name).collect();
            let reduced = fit_lmm(obs, &reduced_names, opts)?;
            Some(bic_compare(&full, &reduced)?)
        };
        rows.push(CoefficientRow {
            covariate: c.name.clone(),
            beta: c.estimate,
            se: c.se,
            delta_bic,
        });
    }
    Ok(CoefficientTable { full, rows })
}

pub fn write_coefficients_csv(table: &CoefficientTable, path: &Path) -> Result<()> {
    let mut s = String::from("covariate,beta,se,delta_bic\n");
    for r in &table.rows {
        let d = r.delta_bic.map(|d| format!("{d:.4}")).unwrap_or_default();
        s.push_str(&format!("{},{:.4},{:.4},{}\n", r.covariate, r.beta, r.se, d));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn display_name(covariate: &str) -> String {
    match covariate {
        INTERCEPT => "Intercept".to_string(),
        SAME_PARTY => "Sim. Party".to_string(),
        SIM_UTTERANCES => "Sim. Utterances".to_string(),
        SIM_DECOMPOSITIONS => "Sim. Decompositions".to_string(),
        other => other.to_string(),
    }
}

pub fn format_delta_bic(d: f64) -> String {
    if d.abs() >= 1000.0 {
        format!("{:.0}k", d / 1000.0)
    } else {
        format!("{d:.0}")
    }
}

/// One line per covariate: name, estimate, (se), and ΔBIC where defined.
pub fn format_table_row(row: &CoefficientRow) -> String {
    let mut s = format!("{:<20} {:.2} ({:.2})", display_name(&row.covariate), row.beta, row.se);
    if let Some(d) = row.delta_bic {
        s.push_str(&format!("  ΔBIC {}", format_delta_bic(d)));
    }
    s
}

pub fn format_table(table: &CoefficientTable) -> String {
    let mut out = String::new();
    for r in &table.rows {
        out.push_str(&format_table_row(r));
        out.push('\n');
    }
    out.push_str(&format!(
        "n = {}  loglik = {:.4}  BIC = {:.4}  σ²_a = {:.4}  σ²_b = {:.4}  σ²_e = {:.4}\n",
        table.full.n_obs,
        table.full.loglik,
        table.full.bic,
        table.full.sigma2_a,
        table.full.sigma2_b,
        table.full.sigma2_e
    ));
    out
}
