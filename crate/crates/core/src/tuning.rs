//! Cross-validated choice of the prior-belief parameter p_o: short chains on
//! each training fold, held-out BIC of the per-fold MAP model, smallest
//! fold-averaged BIC wins.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{fit_model, standardize, StandardizedDesign};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::sampler::{run_chain, ChainConfig, ProposalWeights};

#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub p_o_grid: Vec<usize>,
    pub cv_steps: usize,
    pub cv_burn_in: usize,
    pub cv_n_importance: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            p_o_grid: (1..=10).collect(),
            cv_steps: 200,
            cv_burn_in: 100,
            cv_n_importance: 30,
            seed: 0,
        }
    }
}

/// Selected p_o plus the full grid-by-fold BIC table (NaN marks folds whose
/// chain failed to initialize).
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub p_o_star: usize,
    pub bic_table: Array2<f64>,
}

/// Deterministic shuffled partition of `n` rows into `folds` near-equal
/// folds.
pub(crate) fn fold_partition(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xF01D));
    order.shuffle(&mut rng);
    (0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect()
}

/// Gaussian profile BIC of model `m` on held-out rows, with coefficients fit
/// on the training fold and test rows transformed by the training
/// standardization.
fn held_out_bic(
    train: &StandardizedDesign,
    m: &crate::design::ModelIndex,
    test_y: &[f64],
    test_x_raw: &Array2<f64>,
) -> Result<f64> {
    let fit = fit_model(train, m)?;
    let x_te = train.transform_rows(&test_x_raw.view())?;
    let yhat = train.predict(&x_te.view(), m, &fit.beta_hat.view());
    let n_test = test_y.len() as f64;
    let rss: f64 = test_y
        .iter()
        .zip(yhat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(n_test * (rss / n_test).ln() + m.len() as f64 * n_test.ln())
}

/// Runs the grid-by-fold cross validation and returns the p_o with the
/// smallest fold-averaged held-out BIC (ties to the smallest p_o).
pub fn select_p_o(
    d: &StandardizedDesign,
    weights: &ProposalWeights,
    cfg: &CvConfig,
    chain_template: &ChainConfig,
) -> Result<CvOutcome> {
    let n = d.n();
    if cfg.folds < 2 || n < cfg.folds {
        return Err(Error::InvalidConfig(format!(
            "need 2 <= folds <= n, got folds {} with n {}",
            cfg.folds, n
        )));
    }
    if cfg.p_o_grid.is_empty() {
        return Err(Error::InvalidConfig("empty p_o grid".into()));
    }
    if cfg.cv_steps <= cfg.cv_burn_in {
        return Err(Error::InvalidConfig(format!(
            "cv_steps ({}) must exceed cv_burn_in ({})",
            cfg.cv_steps, cfg.cv_burn_in
        )));
    }

    let partition = fold_partition(n, cfg.folds, cfg.seed);
    let (y_raw, x_raw) = d.raw_data();

    // grid x folds cells, each with its own derived seed; embarrassingly
    // parallel and order independent
    let cells: Vec<(usize, usize)> = (0..cfg.p_o_grid.len())
        .flat_map(|g| (0..cfg.folds).map(move |f| (g, f)))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(g, f)| {
            let p_o = cfg.p_o_grid[g];
            let test_rows = &partition[f];
            let train_rows: Vec<usize> = (0..n).filter(|r| !test_rows.contains(r)).collect();

            let mut x_tr = Array2::<f64>::zeros((train_rows.len(), d.p()));
            let mut y_tr = Vec::with_capacity(train_rows.len());
            for (i, &r) in train_rows.iter().enumerate() {
                x_tr.row_mut(i).assign(&x_raw.row(r));
                y_tr.push(y_raw[r]);
            }
            let mut x_te = Array2::<f64>::zeros((test_rows.len(), d.p()));
            let mut y_te = Vec::with_capacity(test_rows.len());
            for (i, &r) in test_rows.iter().enumerate() {
                x_te.row_mut(i).assign(&x_raw.row(r));
                y_te.push(y_raw[r]);
            }

            let y_tr_arr = ndarray::Array1::from(y_tr);
            let cell = (|| -> Result<f64> {
                let train = standardize(&y_tr_arr.view(), &x_tr.view(), d.centered())?;
                let chain_cfg = ChainConfig {
                    steps: cfg.cv_steps,
                    burn_in: cfg.cv_burn_in,
                    n_importance: cfg.cv_n_importance,
                    p_o,
                    max_size: chain_template.max_size,
                    seed: derive_seed(cfg.seed, (g * cfg.folds + f) as u64 + 1),
                    l0: chain_template.l0.clone(),
                    record_trace: false,
                };
                let (summary, _) = run_chain(&train, weights, chain_cfg)?;
                held_out_bic(&train, &summary.map_model, &y_te, &x_te)
            })();
            match cell {
                Ok(v) => v,
                Err(e) => {
                    log::warn!("cv cell (p_o {p_o}, fold {f}) skipped: {e}");
                    f64::NAN
                }
            }
        })
        .collect();

    let mut bic_table = Array2::<f64>::from_elem((cfg.p_o_grid.len(), cfg.folds), f64::NAN);
    for (&(g, f), &v) in cells.iter().zip(values.iter()) {
        bic_table[[g, f]] = v;
    }

    let mut best: Option<(usize, f64)> = None;
    for (g, &p_o) in cfg.p_o_grid.iter().enumerate() {
        let finite: Vec<f64> = bic_table
            .row(g)
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        if finite.is_empty() {
            continue;
        }
        let mean = finite.iter().sum::<f64>() / finite.len() as f64;
        let better = match best {
            None => true,
            Some((_, cur)) => mean < cur,
        };
        if better {
            best = Some((p_o, mean));
        }
    }
    let (p_o_star, _) = best.ok_or_else(|| {
        Error::InitializationFailed("every cross-validation cell failed".into())
    })?;
    Ok(CvOutcome { p_o_star, bic_table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::standardize;
    use ndarray::{Array1, Array2};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn folds_are_disjoint_cover_and_deterministic() {
        for (n, folds) in [(100usize, 10usize), (33, 10), (10, 5)] {
            let a = fold_partition(n, folds, 42);
            let b = fold_partition(n, folds, 42);
            assert_eq!(a, b);
            let mut seen = vec![false; n];
            for fold in &a {
                for &r in fold {
                    assert!(!seen[r], "row {r} assigned twice");
                    seen[r] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
            let sizes: Vec<usize> = a.iter().map(|f| f.len()).collect();
            let (lo, hi) = (
                sizes.iter().min().unwrap(),
                sizes.iter().max().unwrap(),
            );
            assert!(hi - lo <= 1, "fold sizes {sizes:?}");
        }
    }

    fn strong_signal_design(rng: &mut ChaCha8Rng, n: usize) -> StandardizedDesign {
        let x = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(rng));
        let y: Array1<f64> = x
            .column(0)
            .iter()
            .map(|v| 5.0 * v + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        standardize(&y.view(), &x.view(), false).unwrap()
    }

    #[test]
    fn singleton_grid_returns_its_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = strong_signal_design(&mut rng, 30);
        let w = ProposalWeights::uniform(2);
        let cfg = CvConfig {
            folds: 5,
            p_o_grid: vec![4],
            cv_steps: 60,
            cv_burn_in: 20,
            cv_n_importance: 10,
            seed: 1,
        };
        let out = select_p_o(&d, &w, &cfg, &ChainConfig::default()).unwrap();
        assert_eq!(out.p_o_star, 4);
        assert_eq!(out.bic_table.shape(), &[1, 5]);
    }

    #[test]
    fn ties_resolve_to_the_smallest_p_o() {
        // single-covariate space: every chain has MAP {0} whatever p_o is,
        // so the BIC rows coincide exactly and the smallest entry must win
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let x = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(&mut rng));
        let y: Array1<f64> = x
            .column(0)
            .iter()
            .map(|v| 2.0 * v + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = standardize(&y.view(), &x.view(), false).unwrap();
        let w = ProposalWeights::uniform(1);
        let cfg = CvConfig {
            folds: 5,
            p_o_grid: vec![1, 2, 3],
            cv_steps: 50,
            cv_burn_in: 20,
            cv_n_importance: 10,
            seed: 7,
        };
        let out = select_p_o(&d, &w, &cfg, &ChainConfig::default()).unwrap();
        for f in 0..5 {
            let col: Vec<f64> = (0..3).map(|g| out.bic_table[[g, f]]).collect();
            assert!(
                col.iter().all(|v| v.to_bits() == col[0].to_bits()),
                "fold {f} BIC differs across p_o: {col:?}"
            );
        }
        assert_eq!(out.p_o_star, 1);
    }

    #[test]
    fn selection_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 36;
        let x = Array2::from_shape_fn((n, 4), |_| StandardNormal.sample(&mut rng));
        let y: Array1<f64> = (0..n)
            .map(|i| 2.0 * x[[i, 1]] - 1.0 * x[[i, 3]] + 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = standardize(&y.view(), &x.view(), false).unwrap();
        let w = ProposalWeights::uniform(4);
        let cfg = CvConfig {
            folds: 6,
            p_o_grid: vec![1, 2, 3],
            cv_steps: 80,
            cv_burn_in: 30,
            cv_n_importance: 10,
            seed: 11,
        };
        let a = select_p_o(&d, &w, &cfg, &ChainConfig::default()).unwrap();
        let b = select_p_o(&d, &w, &cfg, &ChainConfig::default()).unwrap();
        assert_eq!(a.p_o_star, b.p_o_star);
        for (x1, x2) in a.bic_table.iter().zip(b.bic_table.iter()) {
            assert!(
                (x1.is_nan() && x2.is_nan()) || x1.to_bits() == x2.to_bits(),
                "table cells differ: {x1} vs {x2}"
            );
        }
    }
}
