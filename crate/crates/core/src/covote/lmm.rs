//! Gaussian linear mixed model with crossed random intercepts for the two
//! pair slots:
//!
//! ```text
//! y = Xβ + Z_a a + Z_b b + e,   a ~ N(0, σ²_a I), b ~ N(0, σ²_b I), e ~ N(0, σ²_e I)
//! ```
//!
//! Writing V = σ²_e H with H = I + Z Γ Z^T and Γ = diag(γ_a, γ_b) (variance
//! ratios), every quantity the likelihood needs reduces to q×q algebra on
//! M = I + Γ^{1/2} Z^T Z Γ^{1/2}, where q is the number of random-effect
//! levels:
//!
//! * log|H| = log|M|
//! * H⁻¹ = I − Z G Z^T with G = Γ^{1/2} M⁻¹ Γ^{1/2}
//!
//! The sufficient statistics Z^T Z, Z^T X, Z^T y, X^T X, X^T y and y^T y are
//! accumulated once, so an evaluation costs O(q³) regardless of N. σ²_e is
//! profiled out in closed form and the two log-ratios are searched with
//! multi-start Nelder–Mead. The likelihood is full ML (not REML), so fits with
//! different fixed effects are comparable by BIC.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CovoteObservation;
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::text::sha256_hex;

pub const INTERCEPT: &str = "(intercept)";

const LOG_RATIO_MIN: f64 = -25.0;
const LOG_RATIO_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma2_a: f64,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    /// Intercept first, then features in the requested order.
    pub beta: Vec<Coefficient>,
    pub sigma2_a: f64,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
    pub loglik: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub evaluations: usize,
    /// Digest of the observations (pairs and responses) the model was fit on.
    pub observation_key: String,
}

impl ModelFit {
    pub fn n_params(&self) -> usize {
        self.beta.len() + 3
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.beta.iter().find(|c| c.name == name)
    }

    pub fn variance_components(&self) -> VarianceComponents {
        VarianceComponents {
            sigma2_a: self.sigma2_a,
            sigma2_b: self.sigma2_b,
            sigma2_e: self.sigma2_e,
        }
    }
}

/// k·ln(n) − 2·loglik.
pub fn bic(n_params: usize, n_obs: usize, loglik: f64) -> f64 {
    n_params as f64 * (n_obs as f64).ln() - 2.0 * loglik
}

#[derive(Debug, Clone)]
pub struct LmmOptions {
    /// Z-score feature columns before fitting.
    pub standardize: bool,
    pub starts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self {
            standardize: false,
            starts: 3,
            seed: 0,
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

/// Design and sufficient statistics for one set of observations.
#[derive(Debug, Clone)]
pub struct LmmProblem {
    pub column_names: Vec<String>,
    n: usize,
    q_a: usize,
    q_b: usize,
    /// Design rows, needed only by [`LmmProblem::design`].
    x: DMatrix<f64>,
    y: DVector<f64>,
    slot_a: Vec<usize>,
    slot_b: Vec<usize>,
    ztz: DMatrix<f64>,
    ztx: DMatrix<f64>,
    zty: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    observation_key: String,
}

/// GLS solution at fixed variance ratios.
#[derive(Debug, Clone)]
pub struct GlsSolution {
    pub beta: DVector<f64>,
    /// (X^T H⁻¹ X)⁻¹; multiply by σ²_e for the covariance of β.
    pub xthx_inv: DMatrix<f64>,
    /// r^T H⁻¹ r at the GLS β.
    pub quad: f64,
    pub log_det_h: f64,
}

fn observation_key(obs: &[CovoteObservation]) -> String {
    let mut s = String::new();
    for o in obs {
        s.push_str(&format!("{}\u{1f}{}\u{1f}{:e}\n", o.leg_a, o.leg_b, o.response));
    }
    sha256_hex(s.as_bytes())
}

impl LmmProblem {
    pub fn new(obs: &[CovoteObservation], feature_names: &[&str], standardize: bool) -> Result<Self> {
        let n = obs.len();
        let p = feature_names.len() + 1;
        if n <= p + 2 {
            return Err(Error::invalid(format!("{n} observations cannot support {p} fixed effects")));
        }
        let mut levels_a = BTreeMap::new();
        let mut levels_b = BTreeMap::new();
        for o in obs {
            let na = levels_a.len();
            levels_a.entry(o.leg_a.as_str()).or_insert(na);
            let nb = levels_b.len();
            levels_b.entry(o.leg_b.as_str()).or_insert(nb);
        }
        if levels_a.len() < 2 || levels_b.len() < 2 {
            return Err(Error::invalid("each pair slot needs at least two distinct legislators"));
        }
        let slot_a: Vec<usize> = obs.iter().map(|o| levels_a[o.leg_a.as_str()]).collect();
        let slot_b: Vec<usize> = obs.iter().map(|o| levels_b[o.leg_b.as_str()]).collect();
        let (q_a, q_b) = (levels_a.len(), levels_b.len());

        let mut x = DMatrix::<f64>::zeros(n, p);
        let mut y = DVector::<f64>::zeros(n);
        for (i, o) in obs.iter().enumerate() {
            if !o.response.is_finite() {
                return Err(Error::invalid("non-finite response"));
            }
            y[i] = o.response;
            x[(i, 0)] = 1.0;
            for (j, name) in feature_names.iter().enumerate() {
                let v = *o
                    .features
                    .get(*name)
                    .ok_or_else(|| Error::invalid(format!("observation lacks feature {name:?}")))?;
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite value for feature {name:?}")));
                }
                x[(i, j + 1)] = v;
            }
        }
        if standardize {
            for j in 1..p {
                let col = x.column(j);
                let mean = col.sum() / n as f64;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    x.column_mut(j).iter_mut().for_each(|v| *v = (*v - mean) / sd);
                }
            }
        }
        let mut column_names = vec![INTERCEPT.to_string()];
        column_names.extend(feature_names.iter().map(|s| s.to_string()));
        check_collinearity(&x, &column_names)?;

        let q = q_a + q_b;
        let mut ztz = DMatrix::<f64>::zeros(q, q);
        let mut ztx = DMatrix::<f64>::zeros(q, p);
        let mut zty = DVector::<f64>::zeros(q);
        for i in 0..n {
            let (a, b) = (slot_a[i], q_a + slot_b[i]);
            ztz[(a, a)] += 1.0;
            ztz[(b, b)] += 1.0;
            ztz[(a, b)] += 1.0;
            ztz[(b, a)] += 1.0;
            for j in 0..p {
                ztx[(a, j)] += x[(i, j)];
                ztx[(b, j)] += x[(i, j)];
            }
            zty[a] += y[i];
            zty[b] += y[i];
        }
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let yty = y.dot(&y);
        Ok(Self {
            column_names,
            n,
            q_a,
            q_b,
            x,
            y,
            slot_a,
            slot_b,
            ztz,
            ztx,
            zty,
            xtx,
            xty,
            yty,
            observation_key: observation_key(obs),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    /// Fixed-effect design (intercept first), response, and slot level of each row.
    pub fn design(&self) -> (&DMatrix<f64>, &DVector<f64>, &[usize], &[usize]) {
        (&self.x, &self.y, &self.slot_a, &self.slot_b)
    }

    /// Solves GLS at variance ratios γ_a = σ²_a/σ²_e, γ_b = σ²_b/σ²_e.
    pub fn gls(&self, gamma_a: f64, gamma_b: f64) -> Result<GlsSolution> {
        let q = self.q_a + self.q_b;
        let sqrt_g: Vec<f64> = (0..q)
            .map(|i| if i < self.q_a { gamma_a } else { gamma_b }.max(0.0).sqrt())
            .collect();
        let mut m = DMatrix::<f64>::identity(q, q);
        for i in 0..q {
            for j in 0..q {
                m[(i, j)] += sqrt_g[i] * self.ztz[(i, j)] * sqrt_g[j];
            }
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Numerical("random-effect system not positive definite".into()))?;
        let log_det_h = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();

        // S = Γ^{1/2} Z^T [X | y]; then [X|y]^T H⁻¹ [X|y] = [X|y]^T[X|y] − S^T M⁻¹ S.
        let p = self.ztx.ncols();
        let mut s = DMatrix::<f64>::zeros(q, p + 1);
        for i in 0..q {
            for j in 0..p {
                s[(i, j)] = sqrt_g[i] * self.ztx[(i, j)];
            }
            s[(i, p)] = sqrt_g[i] * self.zty[i];
        }
        let minv_s = chol.solve(&s);
        let corr = s.transpose() * minv_s;
        let xthx = &self.xtx - corr.view((0, 0), (p, p));
        let xthy = &self.xty - corr.view((0, p), (p, 1)).column(0);
        let ythy = self.yty - corr[(p, p)];

        let xthx_chol = xthx
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularDesign(self.column_names.clone()))?;
        let beta = xthx_chol.solve(&xthy);
        let xthx_inv = xthx_chol.inverse();
        let quad = (ythy - beta.dot(&xthy)).max(0.0);
        Ok(GlsSolution {
            beta,
            xthx_inv,
            quad,
            log_det_h,
        })
    }

    /// ML log-likelihood with σ²_e profiled out, and that σ²_e.
    pub fn profile_loglik(&self, gamma_a: f64, gamma_b: f64) -> Result<(f64, f64, GlsSolution)> {
        let sol = self.gls(gamma_a, gamma_b)?;
        let n = self.n as f64;
        let sigma2_e = sol.quad / n;
        if sigma2_e <= 0.0 {
            return Err(Error::Numerical("zero residual variance".into()));
        }
        let ll = -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + sigma2_e.ln() + 1.0) - 0.5 * sol.log_det_h;
        Ok((ll, sigma2_e, sol))
    }

    /// ML log-likelihood at arbitrary variance components, with β at its GLS value.
    pub fn loglik(&self, vc: &VarianceComponents) -> Result<f64> {
        if vc.sigma2_e <= 0.0 || vc.sigma2_a < 0.0 || vc.sigma2_b < 0.0 {
            return Err(Error::invalid("variance components must be non-negative with σ²_e > 0"));
        }
        let sol = self.gls(vc.sigma2_a / vc.sigma2_e, vc.sigma2_b / vc.sigma2_e)?;
        let n = self.n as f64;
        let log_det_v = n * vc.sigma2_e.ln() + sol.log_det_h;
        Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det_v + sol.quad / vc.sigma2_e))
    }
}

/// Names the first column that is (numerically) a combination of earlier
/// ones, together with the earlier columns it depends on.
fn check_collinearity(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let p = x.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..p {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        for q in &basis {
            let c = q.dot(&r);
            r -= q * c;
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= 1e-9 * norm {
            let mut involved = Vec::new();
            if j > 0 && norm > 0.0 {
                let prev = x.columns(0, j).into_owned();
                let gram = prev.transpose() * &prev;
                if let Some(ch) = gram.cholesky() {
                    let coef = ch.solve(&(prev.transpose() * &col));
                    involved.extend(
                        (0..j)
                            .filter(|&k| coef[k].abs() > 1e-8)
                            .map(|k| names[k].clone()),
                    );
                }
            }
            involved.push(names[j].clone());
            return Err(Error::SingularDesign(involved));
        }
        basis.push(r / rn);
    }
    Ok(())
}

/// Fits the crossed random-intercept model by maximum likelihood.
pub fn fit_lmm(obs: &[CovoteObservation], feature_names: &[&str], opts: &LmmOptions) -> Result<ModelFit> {
    let problem = LmmProblem::new(obs, feature_names, opts.standardize)?;
    fit_problem(&problem, opts)
}

pub fn fit_problem(problem: &LmmProblem, opts: &LmmOptions) -> Result<ModelFit> {
    let objective = |theta: &[f64]| -> f64 {
        let ga = theta[0].clamp(LOG_RATIO_MIN, LOG_RATIO_MAX).exp();
        let gb = theta[1].clamp(LOG_RATIO_MIN, LOG_RATIO_MAX).exp();
        problem.profile_loglik(ga, gb).map_or(f64::INFINITY, |(ll, _, _)| -ll)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0, 0.0]];
    while starts.len() < opts.starts.max(1) {
        starts.push(vec![rng.gen_range(-4.0..2.0), rng.gen_range(-4.0..2.0)]);
    }
    let mut best: Option<crate::optim::NelderMeadResult> = None;
    let mut total_evals = 0;
    let mut trace = Vec::new();
    for s in &starts {
        let r = nelder_mead(objective, s, &opts.nelder_mead);
        total_evals += r.evaluations;
        trace.push(format!(
            "start ({:.3}, {:.3}) -> ({:.4}, {:.4}) f={:.6} converged={}",
            s[0], s[1], r.x[0], r.x[1], r.f, r.converged
        ));
        if r.converged && best.as_ref().is_none_or(|b| r.f < b.f) {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::NonConvergence {
        evaluations: total_evals,
        trace: trace.join("; "),
    })?;
    if !best.f.is_finite() {
        return Err(Error::Numerical("likelihood is not finite at any start".into()));
    }
    let ga = best.x[0].clamp(LOG_RATIO_MIN, LOG_RATIO_MAX).exp();
    let gb = best.x[1].clamp(LOG_RATIO_MIN, LOG_RATIO_MAX).exp();
    let (loglik, sigma2_e, sol) = problem.profile_loglik(ga, gb)?;
    let beta = problem
        .column_names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name: name.clone(),
            estimate: sol.beta[j],
            se: (sigma2_e * sol.xthx_inv[(j, j)]).max(0.0).sqrt(),
        })
        .collect::<Vec<_>>();
    let k = beta.len() + 3;
    Ok(ModelFit {
        beta,
        sigma2_a: ga * sigma2_e,
        sigma2_b: gb * sigma2_e,
        sigma2_e,
        loglik,
        bic: bic(k, problem.n, loglik),
        n_obs: problem.n,
        evaluations: total_evals,
        observation_key: problem.observation_key.clone(),
    })
}

/// ΔBIC = BIC(reduced) − BIC(full); positive values favor the full model.
pub fn bic_compare(full: &ModelFit, reduced: &ModelFit) -> Result<f64> {
    if full.observation_key != reduced.observation_key || full.n_obs != reduced.n_obs {
        return Err(Error::ObservationMismatch);
    }
    if let Some(extra) = reduced.beta.iter().find(|c| full.coefficient(&c.name).is_none()) {
        return Err(Error::invalid(format!(
            "reduced model has covariate {:?} missing from the full model",
            extra.name
        )));
    }
    Ok(reduced.bic - full.bic)
}
