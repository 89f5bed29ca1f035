//! Pseudo-marginal Metropolis-Hastings over model space.
//!
//! Each chain state carries the importance-sample estimate of E(h(beta_M))
//! that was drawn when the state was accepted; proposals are scored with a
//! fresh block and the stored estimate is never recomputed in place. That is
//! the grouped-independence rule that keeps the marginal over models exact.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::design::{fit_model, ModelFit, ModelIndex, StandardizedDesign};
use crate::elastic_net::{cv_coefficients, ElasticNetConfig};
use crate::error::{Error, Result};
use crate::l0::{default_epsilon, L0Config};
use crate::score::{estimate_e_h, ModelScore};

/// Strictly positive per-covariate proposal weights.
#[derive(Debug, Clone)]
pub struct ProposalWeights(Vec<f64>);

impl ProposalWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidConfig("empty proposal weights".into()));
        }
        if let Some(j) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "proposal weight {j} is not strictly positive"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(p: usize) -> Self {
        Self(vec![1.0; p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn outside_sum(&self, m: &ModelIndex) -> f64 {
        (0..self.0.len())
            .filter(|&j| !m.contains(j))
            .map(|j| self.0[j])
            .sum()
    }

    fn pick_outside(&self, m: &ModelIndex, rng: &mut impl Rng) -> (usize, f64) {
        let total = self.outside_sum(m);
        let r = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for j in (0..self.0.len()).filter(|&j| !m.contains(j)) {
            acc += self.0[j];
            last = Some(j);
            if acc >= r {
                return (j, total);
            }
        }
        (last.expect("at least one outside covariate"), total)
    }
}

/// Squared elastic-net coefficients plus an n^-2 floor, so every covariate
/// keeps positive proposal mass and the chain stays irreducible.
pub fn elastic_net_weights(
    d: &StandardizedDesign,
    cfg: &ElasticNetConfig,
) -> Result<ProposalWeights> {
    let beta = cv_coefficients(&d.y(), &d.x(), cfg)?;
    let floor = (d.n() as f64).powi(-2);
    ProposalWeights::new(beta.iter().map(|b| b * b + floor).collect())
}

/// A proposed move with its exact forward and backward log densities.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub model: ModelIndex,
    pub log_q_forward: f64,
    pub log_q_backward: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Move {
    Add,
    Drop,
    Swap,
}

fn feasible_moves(size: usize, p: usize, max_size: usize) -> Vec<Move> {
    let mut moves = Vec::with_capacity(3);
    if size < max_size && size < p {
        moves.push(Move::Add);
    }
    if size > 1 {
        moves.push(Move::Drop);
    }
    if size < p {
        moves.push(Move::Swap);
    }
    moves
}

/// One ADD/DROP/SWAP proposal from `m`. Returns `None` when no move is
/// feasible (single-model spaces), in which case the chain stays put.
///
/// ADD inserts an outside covariate with probability proportional to its
/// weight, DROP removes a member uniformly, SWAP composes the two. The move
/// type is uniform over the feasible set on each side, and the returned
/// densities account for both feasibility sets exactly.
pub fn propose(
    m: &ModelIndex,
    w: &ProposalWeights,
    rng: &mut impl Rng,
    max_size: usize,
) -> Option<Proposal> {
    let p = w.len();
    let size = m.len();
    debug_assert!(size >= 1 && size <= max_size);
    let moves = feasible_moves(size, p, max_size);
    if moves.is_empty() {
        return None;
    }
    let ln_moves = (moves.len() as f64).ln();
    let mv = moves[rng.random_range(0..moves.len())];

    let proposal = match mv {
        Move::Add => {
            let (j, w_out) = w.pick_outside(m, rng);
            let model = m.with(j);
            let back_moves = feasible_moves(size + 1, p, max_size);
            Proposal {
                log_q_forward: -ln_moves + w.as_slice()[j].ln() - w_out.ln(),
                log_q_backward: -(back_moves.len() as f64).ln() - ((size + 1) as f64).ln(),
                model,
            }
        }
        Move::Drop => {
            let i = m.indices()[rng.random_range(0..size)];
            let model = m.without(i);
            let back_moves = feasible_moves(size - 1, p, max_size);
            let w_out_back = w.outside_sum(&model);
            Proposal {
                log_q_forward: -ln_moves - (size as f64).ln(),
                log_q_backward: -(back_moves.len() as f64).ln() + w.as_slice()[i].ln()
                    - w_out_back.ln(),
                model,
            }
        }
        Move::Swap => {
            let i = m.indices()[rng.random_range(0..size)];
            let (j, w_out) = w.pick_outside(m, rng);
            let model = m.without(i).with(j);
            let back_moves = feasible_moves(size, p, max_size);
            let w_out_back = w_out - w.as_slice()[j] + w.as_slice()[i];
            Proposal {
                log_q_forward: -ln_moves - (size as f64).ln() + w.as_slice()[j].ln() - w_out.ln(),
                log_q_backward: -(back_moves.len() as f64).ln() - (size as f64).ln()
                    + w.as_slice()[i].ln()
                    - w_out_back.ln(),
                model,
            }
        }
    };
    Some(proposal)
}

/// Current state of the joint (model, importance-block) chain; the block is
/// summarized by the retained estimate inside `score`.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub model: ModelIndex,
    pub score: ModelScore,
    pub fit: ModelFit,
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub steps: usize,
    pub burn_in: usize,
    /// Importance samples per proposal (N).
    pub n_importance: usize,
    /// Prior belief about the true model size, entering the default epsilon.
    pub p_o: usize,
    /// Largest model the chain may visit; `None` means floor(sqrt(n)).
    pub max_size: Option<usize>,
    pub seed: u64,
    pub l0: L0Config,
    pub record_trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            steps: 15_000,
            burn_in: 5_000,
            n_importance: 100,
            p_o: 1,
            max_size: None,
            seed: 0,
            l0: L0Config::default(),
            record_trace: false,
        }
    }
}

/// One row of the optional diagnostics trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub model: ModelIndex,
    pub log_score: f64,
    pub accepted: bool,
}

/// Visit-frequency summary of the post-burn-in chain.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub visit_counts: BTreeMap<ModelIndex, u64>,
    /// Most visited model; ties go to the lexicographically smallest set.
    pub map_model: ModelIndex,
    /// Visit frequencies, summing to one.
    pub r_hat: BTreeMap<ModelIndex, f64>,
    /// Per-covariate inclusion probabilities.
    pub inclusion_prob: Vec<f64>,
}

impl PosteriorSummary {
    pub fn from_counts(visit_counts: BTreeMap<ModelIndex, u64>, p: usize) -> Self {
        let total: u64 = visit_counts.values().sum();
        debug_assert!(total > 0);
        let mut map_model = ModelIndex::empty();
        let mut best = 0u64;
        let mut r_hat = BTreeMap::new();
        let mut inclusion_prob = vec![0.0; p];
        for (m, &c) in &visit_counts {
            let freq = c as f64 / total as f64;
            r_hat.insert(m.clone(), freq);
            for &j in m.indices() {
                inclusion_prob[j] += freq;
            }
            if c > best {
                best = c;
                map_model = m.clone();
            }
        }
        Self {
            visit_counts,
            map_model,
            r_hat,
            inclusion_prob,
        }
    }

    /// Merges summaries from independent chains by adding visit counts.
    pub fn merge(summaries: &[PosteriorSummary], p: usize) -> Self {
        let mut counts: BTreeMap<ModelIndex, u64> = BTreeMap::new();
        for s in summaries {
            for (m, &c) in &s.visit_counts {
                *counts.entry(m.clone()).or_insert(0) += c;
            }
        }
        Self::from_counts(counts, p)
    }
}

pub struct StepOutcome {
    pub accepted: bool,
    /// Proposed model, when a move was feasible.
    pub proposed: Option<ModelIndex>,
}

/// The pseudo-marginal chain, exposed step by step so tests can watch single
/// transitions.
pub struct Chain<'a> {
    design: &'a StandardizedDesign,
    weights: &'a ProposalWeights,
    cfg: ChainConfig,
    max_size: usize,
    rng: ChaCha8Rng,
    state: ChainState,
}

impl<'a> Chain<'a> {
    pub fn new(
        design: &'a StandardizedDesign,
        weights: &'a ProposalWeights,
        cfg: ChainConfig,
    ) -> Result<Self> {
        let (n, p) = (design.n(), design.p());
        if weights.len() != p {
            return Err(Error::InvalidConfig(format!(
                "{} proposal weights for {} covariates",
                weights.len(),
                p
            )));
        }
        if cfg.steps <= cfg.burn_in {
            return Err(Error::InvalidConfig(format!(
                "steps ({}) must exceed burn_in ({})",
                cfg.steps, cfg.burn_in
            )));
        }
        if cfg.n_importance == 0 {
            return Err(Error::InvalidConfig("n_importance must be positive".into()));
        }
        if n < 4 {
            return Err(Error::InvalidConfig(format!(
                "need at least 4 observations to score a model, got {n}"
            )));
        }
        let max_size = cfg
            .max_size
            .unwrap_or_else(|| (n as f64).sqrt().floor() as usize)
            .clamp(1, p.min(n - 2));

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let state = Self::initial_state(design, weights, &cfg, max_size, &mut rng)?;
        Ok(Self {
            design,
            weights,
            cfg,
            max_size,
            rng,
            state,
        })
    }

    /// Starts from the top-p_o covariates by weight, shrinking by one
    /// covariate whenever the candidate scores -inf, down to a single one.
    fn initial_state(
        design: &StandardizedDesign,
        weights: &ProposalWeights,
        cfg: &ChainConfig,
        max_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ChainState> {
        let p = design.p();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| {
            weights.as_slice()[b]
                .total_cmp(&weights.as_slice()[a])
                .then(a.cmp(&b))
        });
        let start = cfg.p_o.clamp(1, max_size);
        for size in (1..=start).rev() {
            let m = ModelIndex::new(order[..size].to_vec()).expect("distinct indices");
            let fit = match fit_model(design, &m) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let eps = default_epsilon(&fit, design.n(), p, cfg.p_o);
            match estimate_e_h(design, &m, &fit, eps, cfg.n_importance, rng, &cfg.l0) {
                Ok(score) if score.log_score > f64::NEG_INFINITY => {
                    return Ok(ChainState {
                        model: m,
                        score,
                        fit,
                    });
                }
                Ok(_) | Err(Error::Degenerate) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::InitializationFailed(format!(
            "no admissible starting model of size 1..={start}"
        )))
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// One Metropolis-Hastings transition. A fresh importance block is drawn
    /// for the proposal only; on rejection the stored state (model, estimate,
    /// fit) is kept untouched.
    pub fn step(&mut self) -> StepOutcome {
        let Some(prop) = propose(&self.state.model, self.weights, &mut self.rng, self.max_size)
        else {
            return StepOutcome {
                accepted: false,
                proposed: None,
            };
        };

        let candidate = match fit_model(self.design, &prop.model) {
            Ok(fit) => {
                let eps = default_epsilon(&fit, self.design.n(), self.design.p(), self.cfg.p_o);
                match estimate_e_h(
                    self.design,
                    &prop.model,
                    &fit,
                    eps,
                    self.cfg.n_importance,
                    &mut self.rng,
                    &self.cfg.l0,
                ) {
                    Ok(score) => Some((fit, score)),
                    Err(Error::Degenerate) => {
                        log::warn!(
                            "model {} interpolates the response; excluded from the chain",
                            prop.model
                        );
                        None
                    }
                    Err(_) => None,
                }
            }
            // rank-deficient proposals score -inf and are auto-rejected
            Err(_) => None,
        };

        let log_ratio = match &candidate {
            Some((_, score)) => {
                score.log_score - self.state.score.log_score + prop.log_q_backward
                    - prop.log_q_forward
            }
            None => f64::NEG_INFINITY,
        };
        let accepted = if log_ratio >= 0.0 {
            true
        } else {
            let u: f64 = self.rng.random();
            u.ln() < log_ratio
        };
        if accepted {
            let (fit, score) = candidate.expect("accepted proposals carry a finite score");
            self.state = ChainState {
                model: prop.model.clone(),
                score,
                fit,
            };
        }
        StepOutcome {
            accepted,
            proposed: Some(prop.model),
        }
    }
}

/// Runs the chain for `cfg.steps` transitions and summarizes the visits made
/// after `cfg.burn_in`.
pub fn run_chain(
    d: &StandardizedDesign,
    weights: &ProposalWeights,
    cfg: ChainConfig,
) -> Result<(PosteriorSummary, Vec<TraceRecord>)> {
    let record_trace = cfg.record_trace;
    let (steps, burn_in) = (cfg.steps, cfg.burn_in);
    let mut chain = Chain::new(d, weights, cfg)?;
    let mut counts: BTreeMap<ModelIndex, u64> = BTreeMap::new();
    let mut trace = Vec::new();
    for step in 0..steps {
        let out = chain.step();
        if step >= burn_in {
            *counts.entry(chain.state().model.clone()).or_insert(0) += 1;
        }
        if record_trace {
            trace.push(TraceRecord {
                step,
                model: chain.state().model.clone(),
                log_score: chain.state().score.log_score,
                accepted: out.accepted,
            });
        }
    }
    Ok((PosteriorSummary::from_counts(counts, d.p()), trace))
}
