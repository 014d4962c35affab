//! Synthetic observations drawn from the crossed random-intercept model.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CovoteObservation, SAME_PARTY, SIM_DECOMPOSITIONS, SIM_UTTERANCES};

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub n_legislators: usize,
    /// Number of pairs, taken in canonical order; capped at all n(n−1)/2.
    pub n_pairs: usize,
    pub intercept: f64,
    /// (feature name, coefficient).
    pub effects: Vec<(String, f64)>,
    /// Extra features that do not enter the response.
    pub noise_features: Vec<String>,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_e: f64,
}

impl SimSpec {
    /// 40 legislators, every pair, three features with coefficients 2.0, 1.0, 0.5.
    pub fn standard() -> Self {
        Self {
            n_legislators: 40,
            n_pairs: 780,
            intercept: 0.3,
            effects: vec![
                (SAME_PARTY.to_string(), 2.0),
                (SIM_UTTERANCES.to_string(), 1.0),
                (SIM_DECOMPOSITIONS.to_string(), 0.5),
            ],
            noise_features: Vec::new(),
            sigma_a: 0.3,
            sigma_b: 0.3,
            sigma_e: 0.2,
        }
    }
}

/// `same_party` is 1 when two legislators share a randomly drawn party; every
/// other feature is Uniform(0, 1).
pub fn simulate(spec: &SimSpec, seed: u64) -> Vec<CovoteObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..spec.n_legislators).map(|i| format!("L{i:03}")).collect();
    let party: Vec<bool> = ids.iter().map(|_| rng.gen_bool(0.5)).collect();
    let draw = |rng: &mut ChaCha8Rng, sd: f64| if sd > 0.0 { Normal::new(0.0, sd).unwrap().sample(rng) } else { 0.0 };
    let a: Vec<f64> = ids.iter().map(|_| draw(&mut rng, spec.sigma_a)).collect();
    let b: Vec<f64> = ids.iter().map(|_| draw(&mut rng, spec.sigma_b)).collect();
    let mut out = Vec::new();
    'outer: for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if out.len() == spec.n_pairs {
                break 'outer;
            }
            let mut features = BTreeMap::new();
            let mut y = spec.intercept + a[i] + b[j];
            for (name, coef) in &spec.effects {
                let v = if name == SAME_PARTY {
                    (party[i] == party[j]) as u8 as f64
                } else {
                    rng.gen::<f64>()
                };
                y += coef * v;
                features.insert(name.clone(), v);
            }
            for name in &spec.noise_features {
                features.insert(name.clone(), rng.gen::<f64>());
            }
            y += draw(&mut rng, spec.sigma_e);
            out.push(CovoteObservation {
                leg_a: ids[i].clone(),
                leg_b: ids[j].clone(),
                lambda: 1.0 / (1.0 + (-y).exp()),
                n_common: 1,
                response: y,
                features,
            });
        }
    }
    out
}
