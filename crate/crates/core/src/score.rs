//! Unnormalized log fiducial mass of a model: an analytic Gamma/RSS factor
//! times a Monte Carlo estimate of E(h(beta_M)) under the location-scale
//! multivariate t law of the coefficients.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::design::{ModelFit, ModelIndex, StandardizedDesign};
use crate::error::{Error, Result};
use crate::l0::{eval_h, L0Config};
use crate::linalg;
use crate::numeric::ln_gamma;

/// Score of one model: the analytic factor plus the admissibility estimate
/// that travels with the pseudo-marginal chain state.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ModelScore {
    /// Log of the analytic factor of the model mass.
    pub log_base: f64,
    /// Monte Carlo estimate of E(h(beta_M)), in [0, 1].
    pub e_h_hat: f64,
    /// Number of importance samples behind `e_h_hat`.
    pub n_importance: usize,
    /// log_base + log(e_h_hat); -inf when the estimate is zero.
    pub log_score: f64,
}

impl ModelScore {
    /// Convention for rank-deficient or oversized models: h = 0 identically.
    pub fn inadmissible(n_importance: usize) -> Self {
        Self {
            log_base: f64::NEG_INFINITY,
            e_h_hat: 0.0,
            n_importance,
            log_score: f64::NEG_INFINITY,
        }
    }
}

/// An RSS at rounding-noise scale means the model interpolates the response
/// and its mass is undefined.
pub fn is_interpolating(d: &StandardizedDesign, fit: &ModelFit) -> bool {
    let y2 = d.y().dot(&d.y());
    fit.rss <= 1e-20 * y2.max(f64::MIN_POSITIVE)
}

/// Analytic factor of the model mass, in log space:
/// (|M|/2) log pi + log Gamma((n-|M|)/2) - ((n-|M|-1)/2) log RSS_M.
pub fn log_base_score(fit: &ModelFit, n: usize, m: &ModelIndex) -> Result<f64> {
    let k = m.len();
    debug_assert!(k + 1 < n, "log_base_score needs |M| < n - 1");
    if fit.rss <= 0.0 {
        return Err(Error::Degenerate);
    }
    let nu = (n - k) as f64;
    Ok(0.5 * k as f64 * std::f64::consts::PI.ln() + ln_gamma(nu / 2.0)
        - 0.5 * (nu - 1.0) * fit.rss.ln())
}

/// Draws `count` coefficient vectors from
/// t_{n-|M|}(beta_hat, (RSS/(n-|M|)) (X_M'X_M)^{-1}),
/// one per row.
pub fn sample_beta_t(
    fit: &ModelFit,
    n: usize,
    rng: &mut impl Rng,
    count: usize,
) -> Array2<f64> {
    let k = fit.beta_hat.len();
    let nu = (n - k) as f64;
    let s = fit.sigma2_hat.max(0.0).sqrt();
    let chi2 = ChiSquared::new(nu).expect("positive degrees of freedom");
    let mut out = Array2::<f64>::zeros((count, k));
    let mut z = Array1::<f64>::zeros(k);
    for i in 0..count {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let v: f64 = chi2.sample(rng);
        // L^{-T} z has covariance (X_M'X_M)^{-1}
        let u = linalg::solve_lower_transpose(&fit.chol.view(), &z.view());
        let scale = s / (v / nu).sqrt();
        for j in 0..k {
            out[[i, j]] = fit.beta_hat[j] + scale * u[j];
        }
    }
    out
}

/// Estimates E(h(beta_M)) with `n_importance` draws and combines it with the
/// analytic factor.
///
/// The draws are taken sequentially from `rng` (so results are a pure
/// function of the stream); the admissibility evaluations are deterministic
/// and run in parallel.
pub fn estimate_e_h(
    d: &StandardizedDesign,
    m: &ModelIndex,
    fit: &ModelFit,
    epsilon: f64,
    n_importance: usize,
    rng: &mut impl Rng,
    cfg: &L0Config,
) -> Result<ModelScore> {
    debug_assert!(n_importance >= 1);
    if is_interpolating(d, fit) {
        return Err(Error::Degenerate);
    }
    let log_base = log_base_score(fit, d.n(), m)?;
    let draws = sample_beta_t(fit, d.n(), rng, n_importance);
    let admissible = (0..n_importance)
        .into_par_iter()
        .filter(|&i| eval_h(d, m, &draws.row(i), epsilon, fit, cfg).admissible)
        .count();
    let e_h_hat = admissible as f64 / n_importance as f64;
    let log_score = if admissible == 0 {
        f64::NEG_INFINITY
    } else {
        log_base + e_h_hat.ln()
    };
    Ok(ModelScore {
        log_base,
        e_h_hat,
        n_importance,
        log_score,
    })
}
