//! Synthetic benchmark generators and replicate metrics for the two
//! simulation setups, at configurable replicate counts.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{fit_model, standardize, ModelIndex, StandardizedDesign};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::pipeline::{run_selection, PipelineSettings};

/// First setup: independent or exchangeably-correlated Gaussian rows with an
/// 8-covariate true model.
#[derive(Debug, Clone)]
pub struct Setup1Config {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta0: Vec<f64>,
    pub sigma0: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for Setup1Config {
    fn default() -> Self {
        Self {
            n: 100,
            p: 100,
            rho: 0.0,
            beta0: vec![-1.5, -1.0, -0.8, -0.6, 0.6, 0.8, 1.0, 1.5],
            sigma0: 1.0,
            replicates: 50,
            seed: 0,
        }
    }
}

const SETUP1_TEST_ROWS: usize = 100;

/// Second setup: nine covariates at n = 30 where the last six are near
/// linear combinations of the first three, all true coefficients equal one.
#[derive(Debug, Clone)]
pub struct Setup2Config {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for Setup2Config {
    fn default() -> Self {
        Self {
            n: 30,
            replicates: 200,
            seed: 0,
        }
    }
}

const SETUP2_TEST_ROWS: usize = 30;

/// One synthetic dataset: standardized training design plus raw copies and a
/// fresh raw test set.
#[derive(Debug, Clone)]
pub struct ReplicateData {
    pub train: StandardizedDesign,
    pub train_y_raw: Array1<f64>,
    pub train_x_raw: Array2<f64>,
    pub test_y: Array1<f64>,
    pub test_x_raw: Array2<f64>,
    pub m_o: ModelIndex,
    pub beta0: Array1<f64>,
}

/// Per-replicate outcome of a selection run.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateMetrics {
    /// Estimated probability of the MAP model.
    pub r_map: f64,
    /// Estimated probability of the true model.
    pub r_true: f64,
    pub correct_selection: bool,
    pub map_size: usize,
    pub rmse_test: f64,
    pub map_model: ModelIndex,
    pub p_o: usize,
    /// Seed this replicate was generated and run with.
    pub seed: u64,
}

fn setup1_matrix(rng: &mut ChaCha8Rng, rows: usize, p: usize, rho: f64) -> Array2<f64> {
    let mut x = Array2::<f64>::zeros((rows, p));
    let a = (1.0 - rho).sqrt();
    let b = rho.sqrt();
    for i in 0..rows {
        let shared: f64 = StandardNormal.sample(rng);
        for j in 0..p {
            let z: f64 = StandardNormal.sample(rng);
            x[[i, j]] = a * z + b * shared;
        }
    }
    x
}

/// Draws one Setup-1 replicate: fresh design, response from the first eight
/// covariates, and a fresh 100-row test set.
pub fn generate_setup1(cfg: &Setup1Config, rng: &mut ChaCha8Rng) -> Result<ReplicateData> {
    if cfg.beta0.len() != 8 {
        return Err(Error::InvalidConfig(format!(
            "setup 1 uses 8 true coefficients, got {}",
            cfg.beta0.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.rho) {
        return Err(Error::InvalidConfig(format!("rho must lie in [0,1), got {}", cfg.rho)));
    }
    if cfg.p < cfg.beta0.len() {
        return Err(Error::InvalidConfig(format!(
            "p = {} smaller than the true model size {}",
            cfg.p,
            cfg.beta0.len()
        )));
    }
    let beta0 = Array1::from(cfg.beta0.clone());
    let m_o = ModelIndex::new((0..beta0.len()).collect())?;

    let draw = |rng: &mut ChaCha8Rng, rows: usize| -> (Array2<f64>, Array1<f64>) {
        let x = setup1_matrix(rng, rows, cfg.p, cfg.rho);
        let mut y = Array1::<f64>::zeros(rows);
        for i in 0..rows {
            let mut mu = 0.0;
            for (k, &j) in m_o.indices().iter().enumerate() {
                mu += x[[i, j]] * beta0[k];
            }
            let e: f64 = StandardNormal.sample(rng);
            y[i] = mu + cfg.sigma0 * e;
        }
        (x, y)
    };

    let (train_x, train_y) = draw(rng, cfg.n);
    let (test_x, test_y) = draw(rng, SETUP1_TEST_ROWS);
    let train = standardize(&train_y.view(), &train_x.view(), false)?;
    Ok(ReplicateData {
        train,
        train_y_raw: train_y,
        train_x_raw: train_x,
        test_y,
        test_x_raw: test_x,
        m_o,
        beta0,
    })
}

fn setup2_matrix(rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
    let draw = |rng: &mut ChaCha8Rng| -> Array1<f64> {
        (0..rows).map(|_| StandardNormal.sample(rng)).collect()
    };
    let x1 = draw(rng);
    let x2 = draw(rng);
    let x3 = draw(rng);
    let around = |rng: &mut ChaCha8Rng, mean: Array1<f64>| -> Array1<f64> {
        let noise = draw(rng);
        mean + noise.mapv(|v| 0.1 * v)
    };
    let x4 = around(rng, x1.mapv(|v| 0.25 * v));
    let x5 = around(rng, x2.mapv(|v| 0.5 * v));
    let x6 = around(rng, x3.mapv(|v| -0.75 * v));
    let x7 = around(rng, &x1 + &x3);
    let x8 = around(rng, &x2 - &x3);
    let x9 = around(rng, &(&x1 + &x2) + &x3);
    let mut x = Array2::<f64>::zeros((rows, 9));
    for (j, col) in [x1, x2, x3, x4, x5, x6, x7, x8, x9].into_iter().enumerate() {
        x.column_mut(j).assign(&col);
    }
    x
}

/// Draws one Setup-2 replicate, including a fresh 30-row test set built by
/// the same conditional construction.
pub fn generate_setup2(cfg: &Setup2Config, rng: &mut ChaCha8Rng) -> Result<ReplicateData> {
    if cfg.n < 10 {
        return Err(Error::InvalidConfig(format!(
            "setup 2 needs at least 10 observations, got {}",
            cfg.n
        )));
    }
    let draw = |rng: &mut ChaCha8Rng, rows: usize| -> (Array2<f64>, Array1<f64>) {
        let x = setup2_matrix(rng, rows);
        let noise: Array1<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        let y = x.sum_axis(ndarray::Axis(1)) + noise;
        (x, y)
    };
    let (train_x, train_y) = draw(rng, cfg.n);
    let (test_x, test_y) = draw(rng, SETUP2_TEST_ROWS);
    let train = standardize(&train_y.view(), &train_x.view(), false)?;
    Ok(ReplicateData {
        train,
        train_y_raw: train_y,
        train_x_raw: train_x,
        test_y,
        test_x_raw: test_x,
        m_o: ModelIndex::new((0..9).collect())?,
        beta0: Array1::ones(9),
    })
}

/// Scores one finished selection run against the truth and the held-out
/// test set, predicting with training-fit MAP coefficients.
pub fn evaluate_replicate(
    summary: &crate::sampler::PosteriorSummary,
    data: &ReplicateData,
    p_o: usize,
) -> Result<ReplicateMetrics> {
    let map_model = summary.map_model.clone();
    let r_map = summary.r_hat.get(&map_model).copied().unwrap_or(0.0);
    let r_true = summary.r_hat.get(&data.m_o).copied().unwrap_or(0.0);
    let fit = fit_model(&data.train, &map_model)?;
    let x_te = data.train.transform_rows(&data.test_x_raw.view())?;
    let yhat = data.train.predict(&x_te.view(), &map_model, &fit.beta_hat.view());
    let err = &data.test_y - &yhat;
    let rmse_test = (err.dot(&err) / data.test_y.len() as f64).sqrt();
    Ok(ReplicateMetrics {
        r_map,
        r_true,
        correct_selection: map_model == data.m_o,
        map_size: map_model.len(),
        rmse_test,
        map_model,
        p_o,
        seed: 0,
    })
}

/// Aggregated study output.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub per_replicate: Vec<ReplicateMetrics>,
    pub mean_map_size: f64,
    pub mean_rmse: f64,
    pub mean_r_map: f64,
    pub mean_r_true: f64,
    pub proportion_correct: f64,
    /// Mean estimated probability per model, averaged over replicates (models
    /// never visited in a replicate contribute zero).
    #[serde(skip)]
    pub mean_model_prob: BTreeMap<ModelIndex, f64>,
}

fn aggregate(metrics: Vec<(ReplicateMetrics, BTreeMap<ModelIndex, f64>)>) -> StudyResult {
    let r = metrics.len() as f64;
    let mut mean_model_prob: BTreeMap<ModelIndex, f64> = BTreeMap::new();
    for (_, probs) in &metrics {
        for (m, p) in probs {
            *mean_model_prob.entry(m.clone()).or_insert(0.0) += p / r;
        }
    }
    let per_replicate: Vec<ReplicateMetrics> = metrics.into_iter().map(|(m, _)| m).collect();
    StudyResult {
        mean_map_size: per_replicate.iter().map(|m| m.map_size as f64).sum::<f64>() / r,
        mean_rmse: per_replicate.iter().map(|m| m.rmse_test).sum::<f64>() / r,
        mean_r_map: per_replicate.iter().map(|m| m.r_map).sum::<f64>() / r,
        mean_r_true: per_replicate.iter().map(|m| m.r_true).sum::<f64>() / r,
        proportion_correct: per_replicate
            .iter()
            .filter(|m| m.correct_selection)
            .count() as f64
            / r,
        per_replicate,
        mean_model_prob,
    }
}

fn run_replicates<F>(replicates: usize, seed: u64, settings: &PipelineSettings, gen: F) -> Result<StudyResult>
where
    F: Fn(&mut ChaCha8Rng) -> Result<ReplicateData> + Sync,
{
    let runs: Result<Vec<(ReplicateMetrics, BTreeMap<ModelIndex, f64>)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(seed, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let data = gen(&mut rng)?;
            let outcome = run_selection(&data.train, settings, derive_seed(rep_seed, 0xC0DE))?;
            let mut metrics = evaluate_replicate(&outcome.summary, &data, outcome.p_o)?;
            metrics.seed = rep_seed;
            Ok((metrics, outcome.summary.r_hat))
        })
        .collect();
    Ok(aggregate(runs?))
}

/// Runs the full pipeline (weights, optional CV, chain) on `cfg.replicates`
/// independent Setup-1 datasets in parallel.
pub fn run_setup1_study(cfg: &Setup1Config, settings: &PipelineSettings) -> Result<StudyResult> {
    run_replicates(cfg.replicates, cfg.seed, settings, |rng| {
        generate_setup1(cfg, rng)
    })
}

/// Same driver over Setup-2 datasets.
pub fn run_setup2_study(cfg: &Setup2Config, settings: &PipelineSettings) -> Result<StudyResult> {
    run_replicates(cfg.replicates, cfg.seed, settings, |rng| {
        generate_setup2(cfg, rng)
    })
}
