//! Cyclic coordinate descent for the elastic net, used only to build MCMC
//! proposal weights. Objective (1/(2n))||y - Xb||^2 + lambda(alpha ||b||_1 +
//! (1-alpha)/2 ||b||^2).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::derive_seed;

#[derive(Debug, Clone)]
pub struct ElasticNetConfig {
    /// L1 mixing weight alpha in (0, 1].
    pub alpha_mix: f64,
    /// Points on the geometric lambda grid, lambda_max down to 1e-3 lambda_max.
    pub n_lambda: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            alpha_mix: 0.5,
            n_lambda: 100,
            cv_folds: 5,
            seed: 0,
        }
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// One coordinate-descent solve at a fixed lambda, warm-started from `beta`
/// with `resid = y - X beta` maintained by the caller.
fn cd_fit(
    x: &ArrayView2<f64>,
    lambda: f64,
    alpha: f64,
    beta: &mut Array1<f64>,
    resid: &mut Array1<f64>,
) {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).dot(&x.column(j)) / n).collect();
    for _ in 0..1000 {
        let mut max_delta = 0.0_f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho = x.column(j).dot(resid) / n + col_sq[j] * old;
            let new = soft_threshold(rho, lambda * alpha) / (col_sq[j] + lambda * (1.0 - alpha));
            if new != old {
                resid.scaled_add(old - new, &x.column(j));
                beta[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if max_delta < 1e-9 {
            break;
        }
    }
}

fn lambda_grid(y: &ArrayView1<f64>, x: &ArrayView2<f64>, cfg: &ElasticNetConfig) -> Vec<f64> {
    let n = x.nrows() as f64;
    let lambda_max = (0..x.ncols())
        .map(|j| x.column(j).dot(y).abs())
        .fold(0.0_f64, f64::max)
        / (n * cfg.alpha_mix);
    let lambda_max = lambda_max.max(f64::MIN_POSITIVE);
    if cfg.n_lambda == 1 {
        return vec![lambda_max];
    }
    let ratio: f64 = 1e-3;
    (0..cfg.n_lambda)
        .map(|i| lambda_max * ratio.powf(i as f64 / (cfg.n_lambda - 1) as f64))
        .collect()
}

/// Warm-started solution path over a fixed grid; returns one coefficient
/// vector per lambda.
fn cd_path(
    y: &ArrayView1<f64>,
    x: &ArrayView2<f64>,
    lambdas: &[f64],
    alpha: f64,
) -> Vec<Array1<f64>> {
    let p = x.ncols();
    let mut beta = Array1::<f64>::zeros(p);
    let mut resid = y.to_owned();
    lambdas
        .iter()
        .map(|&lam| {
            cd_fit(x, lam, alpha, &mut beta, &mut resid);
            beta.clone()
        })
        .collect()
}

fn gather_rows(x: &ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), x.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&x.row(r));
    }
    out
}

/// Coefficients at the lambda chosen by k-fold cross validation on squared
/// prediction error, refit on the full data.
pub(crate) fn cv_coefficients(
    y: &ArrayView1<f64>,
    x: &ArrayView2<f64>,
    cfg: &ElasticNetConfig,
) -> Result<Array1<f64>> {
    let n = x.nrows();
    if cfg.cv_folds < 2 || n < cfg.cv_folds {
        return Err(Error::InvalidConfig(format!(
            "need 2 <= folds <= n, got folds {} with n {}",
            cfg.cv_folds, n
        )));
    }
    if !(cfg.alpha_mix > 0.0 && cfg.alpha_mix <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha_mix must lie in (0, 1], got {}",
            cfg.alpha_mix
        )));
    }

    let lambdas = lambda_grid(y, x, cfg);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x454e_4554));
    order.shuffle(&mut rng);

    let mut mse = vec![0.0_f64; lambdas.len()];
    for fold in 0..cfg.cv_folds {
        let lo = fold * n / cfg.cv_folds;
        let hi = (fold + 1) * n / cfg.cv_folds;
        let test: Vec<usize> = order[lo..hi].to_vec();
        let train: Vec<usize> = order[..lo].iter().chain(order[hi..].iter()).copied().collect();
        let x_tr = gather_rows(x, &train);
        let y_tr: Array1<f64> = train.iter().map(|&r| y[r]).collect();
        let x_te = gather_rows(x, &test);
        let y_te: Array1<f64> = test.iter().map(|&r| y[r]).collect();
        let path = cd_path(&y_tr.view(), &x_tr.view(), &lambdas, cfg.alpha_mix);
        for (li, beta) in path.iter().enumerate() {
            let pred = x_te.dot(beta);
            let err = &y_te - &pred;
            mse[li] += err.dot(&err) / test.len() as f64;
        }
    }

    let best = mse
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let path = cd_path(y, x, &lambdas[..=best], cfg.alpha_mix);
    Ok(path.into_iter().last().unwrap())
}
