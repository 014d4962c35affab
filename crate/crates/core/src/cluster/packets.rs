use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dist, ClusterModel};
use crate::error::{Error, Result};

/// Four shown members, one held-out member, and one distractor drawn from the
/// cluster whose centroid is farthest away.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPacket {
    pub cluster_id: usize,
    pub shown: Vec<String>,
    pub held_out: String,
    pub distractor: String,
    pub distractor_cluster: usize,
    /// Item indices: four shown, held-out, distractor.
    pub item_indices: Vec<usize>,
}

pub const SHOWN: usize = 4;

/// Builds `per_cluster` packets per cluster. Clusters with fewer than five
/// members are skipped; each skip is returned as a warning.
pub fn make_eval_packets(
    model: &ClusterModel,
    texts: &[String],
    per_cluster: usize,
    seed: u64,
) -> Result<(Vec<EvalPacket>, Vec<String>)> {
    if texts.len() != model.assignments.len() {
        return Err(Error::invalid("one text per clustered item required"));
    }
    if model.k < 2 {
        return Err(Error::invalid("packets need at least two clusters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut packets = Vec::new();
    let mut warnings = Vec::new();
    for cluster in 0..model.k {
        let members = model.members(cluster);
        if members.len() < SHOWN + 1 {
            let msg = format!("cluster {cluster} has {} members; skipped", members.len());
            log::debug!("{msg}");
            warnings.push(msg);
            continue;
        }
        let far = (0..model.k)
            .filter(|&j| j != cluster)
            .map(|j| (j, dist(&model.centroids[cluster], &model.centroids[j])))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .map(|(j, _)| j)
            .ok_or_else(|| Error::invalid("no other cluster for distractors"))?;
        let pool = model.members(far);
        if pool.is_empty() {
            let msg = format!("distractor cluster {far} is empty; cluster {cluster} skipped");
            log::debug!("{msg}");
            warnings.push(msg);
            continue;
        }
        for _ in 0..per_cluster {
            let picked: Vec<usize> = members.choose_multiple(&mut rng, SHOWN + 1).copied().collect();
            let distractor = pool[rng.gen_range(0..pool.len())];
            packets.push(EvalPacket {
                cluster_id: cluster,
                shown: picked[..SHOWN].iter().map(|&i| texts[i].clone()).collect(),
                held_out: texts[picked[SHOWN]].clone(),
                distractor: texts[distractor].clone(),
                distractor_cluster: far,
                item_indices: picked.iter().copied().chain([distractor]).collect(),
            });
        }
    }
    Ok((packets, warnings))
}
