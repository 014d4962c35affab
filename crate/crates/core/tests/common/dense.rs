//! Likelihood of the crossed random-intercept model from its dense covariance.
#![allow(dead_code)]

use infdecomp_core::covote::{LmmProblem, VarianceComponents};
use nalgebra::DMatrix;

/// Log-likelihood from the dense N×N covariance, β at its GLS value.
pub fn dense_loglik(problem: &LmmProblem, vc: &VarianceComponents) -> f64 {
    let (x, y, sa, sb) = problem.design();
    let n = y.len();
    let mut v = DMatrix::<f64>::identity(n, n) * vc.sigma2_e;
    for i in 0..n {
        for j in 0..n {
            if sa[i] == sa[j] {
                v[(i, j)] += vc.sigma2_a;
            }
            if sb[i] == sb[j] {
                v[(i, j)] += vc.sigma2_b;
            }
        }
    }
    let lu = v.clone().lu();
    let vinv = lu.try_inverse().unwrap();
    let xtvx = x.transpose() * &vinv * x;
    let beta = xtvx.try_inverse().unwrap() * x.transpose() * &vinv * y;
    let r = y - x * beta;
    let quad = (r.transpose() * &vinv * &r)[(0, 0)];
    let log_det = v.cholesky().unwrap().l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}
