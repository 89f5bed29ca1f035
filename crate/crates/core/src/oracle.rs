//! Exhaustive small-p references: the exact model posterior by direct
//! enumeration, and the exact constrained L0 minimum by support enumeration.
//! These back the acceptance suite; nothing here is meant to scale.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{fit_model, ModelIndex, StandardizedDesign};
use crate::error::{Error, Result};
use crate::l0::default_epsilon;
use crate::linalg::orthonormal_basis;
use crate::numeric::log_sum_exp;
use crate::score::{is_interpolating, log_base_score, sample_beta_t};

/// Mass of one enumerated model.
#[derive(Debug, Clone)]
pub struct ModelMass {
    pub log_base: f64,
    /// Reference Monte Carlo estimate of E(h) with the exact inner minimum.
    pub e_h_ref: f64,
    /// Normalized posterior probability.
    pub prob: f64,
}

/// The fully enumerated, normalized posterior over all feasible models.
#[derive(Debug, Clone)]
pub struct EnumeratedPosterior {
    pub table: BTreeMap<ModelIndex, ModelMass>,
    pub n_ref: usize,
}

impl EnumeratedPosterior {
    pub fn prob(&self, m: &ModelIndex) -> f64 {
        self.table.get(m).map(|v| v.prob).unwrap_or(0.0)
    }

    /// Model with the largest probability (ties to the smallest index set).
    pub fn map_model(&self) -> ModelIndex {
        let mut best = ModelIndex::empty();
        let mut best_p = f64::NEG_INFINITY;
        for (m, mass) in &self.table {
            if mass.prob > best_p {
                best_p = mass.prob;
                best = m.clone();
            }
        }
        best
    }

    /// Total variation distance to a visit-frequency map.
    pub fn tv_distance(&self, r_hat: &BTreeMap<ModelIndex, f64>) -> f64 {
        let mut keys: Vec<&ModelIndex> = self.table.keys().collect();
        for k in r_hat.keys() {
            if !self.table.contains_key(k) {
                keys.push(k);
            }
        }
        0.5 * keys
            .iter()
            .map(|k| (self.prob(k) - r_hat.get(*k).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }
}

fn combinations(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    if k > p {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + p - k {
                cur[i] += 1;
                for t in (i + 1)..k {
                    cur[t] = cur[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn binomial(p: usize, k: usize) -> f64 {
    if k > p {
        return 0.0;
    }
    let k = k.min(p - k);
    let mut v = 1.0_f64;
    for i in 0..k {
        v = v * (p - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Orthonormal bases of the column span of X'X_S, one per support of size
/// `kappa`. Shared across importance draws: the exact inner minimum for a
/// target vector v = X'target is min_S (||v||^2 - ||Q_S'v||^2) / 2.
struct SupportProjector {
    bases: Vec<Vec<Array1<f64>>>,
}

impl SupportProjector {
    fn build(d: &StandardizedDesign, kappa: usize) -> Self {
        let x = d.x();
        let bases = combinations(d.p(), kappa)
            .into_iter()
            .map(|s| {
                let mut ks = Array2::<f64>::zeros((d.p(), s.len()));
                for (c, &j) in s.iter().enumerate() {
                    ks.column_mut(c).assign(&x.t().dot(&x.column(j)));
                }
                orthonormal_basis(&ks.view(), 1e-12)
            })
            .collect();
        Self { bases }
    }

    fn exact_min(&self, v: &ArrayView1<f64>) -> f64 {
        let v2 = v.dot(v);
        if self.bases.is_empty() {
            return 0.5 * v2;
        }
        let best_explained = self
            .bases
            .iter()
            .map(|basis| basis.iter().map(|q| q.dot(v).powi(2)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (v2 - best_explained).max(0.0)
    }
}

/// Result of the exact cardinality-constrained minimization.
#[derive(Debug, Clone)]
pub struct BruteForceL0 {
    pub min_objective: f64,
    pub argmin_support: ModelIndex,
}

/// Exact minimum of 1/2 ||X'(target - Xb)||^2 over ||b||_0 <= kappa, by
/// enumerating all size-kappa supports.
pub fn brute_force_l0(
    d: &StandardizedDesign,
    target: &ArrayView1<f64>,
    kappa: usize,
) -> Result<BruteForceL0> {
    let p = d.p();
    if kappa > p {
        return Err(Error::InvalidConfig(format!(
            "kappa {kappa} exceeds the number of covariates {p}"
        )));
    }
    if binomial(p, kappa) > 1e6 {
        return Err(Error::EnumerationGuard(format!(
            "C({p}, {kappa}) supports exceed the 1e6 budget"
        )));
    }
    let x = d.x();
    let v = x.t().dot(target);
    if kappa == 0 {
        return Ok(BruteForceL0 {
            min_objective: 0.5 * v.dot(&v),
            argmin_support: ModelIndex::empty(),
        });
    }
    let v2 = v.dot(&v);
    let mut best = f64::INFINITY;
    let mut best_support = Vec::new();
    for s in combinations(p, kappa) {
        let mut ks = Array2::<f64>::zeros((p, s.len()));
        for (c, &j) in s.iter().enumerate() {
            ks.column_mut(c).assign(&x.t().dot(&x.column(j)));
        }
        let basis = orthonormal_basis(&ks.view(), 1e-12);
        let explained: f64 = basis.iter().map(|q| q.dot(&v).powi(2)).sum();
        let obj = 0.5 * (v2 - explained).max(0.0);
        if obj < best {
            best = obj;
            best_support = s;
        }
    }
    Ok(BruteForceL0 {
        min_objective: best,
        argmin_support: ModelIndex::new(best_support).expect("combination is sorted"),
    })
}

/// Enumerates every nonempty full-rank model up to `max_size`, scores each
/// with an `n_ref`-draw estimate of E(h) whose inner minimization is exact,
/// and normalizes in log space.
pub fn enumerate_posterior(
    d: &StandardizedDesign,
    p_o: usize,
    max_size: usize,
    n_ref: usize,
    rng: &mut impl Rng,
) -> Result<EnumeratedPosterior> {
    let p = d.p();
    if p > 15 {
        return Err(Error::EnumerationGuard(format!(
            "enumeration is limited to p <= 15, got {p}"
        )));
    }
    if n_ref < 1000 {
        return Err(Error::InvalidConfig(format!(
            "n_ref must be at least 1000, got {n_ref}"
        )));
    }
    let max_size = max_size.min(p).max(1);

    // deterministic model list with one derived seed each, then parallel
    let mut jobs: Vec<(ModelIndex, u64)> = Vec::new();
    for mask in 1u32..(1u32 << p) {
        if (mask.count_ones() as usize) > max_size {
            continue;
        }
        let idx: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) != 0).collect();
        jobs.push((ModelIndex::new(idx).expect("bitmask"), rng.random::<u64>()));
    }

    let projectors: Vec<SupportProjector> = (0..max_size)
        .map(|kappa| SupportProjector::build(d, kappa))
        .collect();

    let scored: Vec<(ModelIndex, f64, f64)> = jobs
        .into_par_iter()
        .filter_map(|(m, seed)| {
            let fit = fit_model(d, &m).ok()?;
            if is_interpolating(d, &fit) {
                return None; // excluded, like the chain does
            }
            let log_base = match log_base_score(&fit, d.n(), &m) {
                Ok(v) => v,
                Err(_) => return None,
            };
            let eps = default_epsilon(&fit, d.n(), p, p_o);
            let e_h_ref = if eps <= 0.0 {
                1.0
            } else {
                let mut mrng = ChaCha8Rng::seed_from_u64(seed);
                let draws = sample_beta_t(&fit, d.n(), &mut mrng, n_ref);
                let b_m = d.x().t().dot(&d.columns(&m)); // p x |M|
                let projector = &projectors[m.len() - 1];
                let hits = (0..n_ref)
                    .filter(|&i| {
                        let v = b_m.dot(&draws.row(i));
                        projector.exact_min(&v.view()) >= eps
                    })
                    .count();
                hits as f64 / n_ref as f64
            };
            Some((m, log_base, e_h_ref))
        })
        .collect();

    let log_weights: Vec<f64> = scored
        .iter()
        .map(|(_, lb, eh)| {
            if *eh == 0.0 {
                f64::NEG_INFINITY
            } else {
                lb + eh.ln()
            }
        })
        .collect();
    let log_z = log_sum_exp(&log_weights);
    if log_z == f64::NEG_INFINITY {
        return Err(Error::InitializationFailed(
            "every enumerated model has zero admissibility mass".into(),
        ));
    }

    let mut table = BTreeMap::new();
    for ((m, log_base, e_h_ref), lw) in scored.into_iter().zip(log_weights) {
        table.insert(
            m,
            ModelMass {
                log_base,
                e_h_ref,
                prob: (lw - log_z).exp(),
            },
        );
    }
    Ok(EnumeratedPosterior { table, n_ref })
}
