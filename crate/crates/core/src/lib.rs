//! Variable selection for Gaussian linear models by restricting a
//! generalized-fiducial posterior over covariate subsets to epsilon-admissible
//! models: subsets whose predictions cannot be reproduced, to a data-driven
//! precision, by any smaller subset.
//!
//! The pieces:
//!
//! - [`design`]: unit-norm design representation and per-model least squares;
//! - [`l0`]: the admissibility indicator via cardinality-constrained
//!   projected gradient descent, and its default threshold;
//! - [`score`]: the analytic model mass and the Monte Carlo estimate of the
//!   admissibility expectation;
//! - [`sampler`]: pseudo-marginal Metropolis-Hastings over model space with
//!   elastic-net proposal weights;
//! - [`tuning`]: cross-validated choice of the prior-belief parameter;
//! - [`oracle`]: exhaustive small-p references (exact enumeration and exact
//!   constrained minimization) used by the test and acceptance suites;
//! - [`experiments`]: the two synthetic benchmark studies;
//! - [`pipeline`]: weights + tuning + chain glued into one selection run.

pub mod design;
pub mod elastic_net;
pub mod error;
pub mod experiments;
pub mod l0;
mod linalg;
pub mod numeric;
pub mod oracle;
pub mod pipeline;
pub mod sampler;
pub mod score;
pub mod tuning;

pub use design::{delta_m, fit_model, standardize, ModelFit, ModelIndex, StandardizedDesign};
pub use elastic_net::ElasticNetConfig;
pub use error::{Error, Result};
pub use experiments::{
    evaluate_replicate, generate_setup1, generate_setup2, run_setup1_study, run_setup2_study,
    ReplicateData, ReplicateMetrics, Setup1Config, Setup2Config, StudyResult,
};
pub use l0::{default_epsilon, eval_h, l0_min_upper_bound, AdmissibilityVerdict, L0Config};
pub use oracle::{brute_force_l0, enumerate_posterior, BruteForceL0, EnumeratedPosterior};
pub use pipeline::{run_selection, PipelineSettings, SelectionOutcome};
pub use sampler::{
    elastic_net_weights, propose, run_chain, Chain, ChainConfig, ChainState, PosteriorSummary,
    Proposal, ProposalWeights, TraceRecord,
};
pub use score::{estimate_e_h, log_base_score, sample_beta_t, ModelScore};
pub use tuning::{select_p_o, CvConfig, CvOutcome};
