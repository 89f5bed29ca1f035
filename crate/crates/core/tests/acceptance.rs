//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantities. Criterion 4 (the full Setup-1 study) takes
//! hours and is ignored by default; run it with `cargo test -- --ignored`.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use fidsel::*;

fn report(criterion: &str, ok: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> StandardizedDesign {
    let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng));
    let y: Array1<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    standardize(&y.view(), &x.view(), false).unwrap()
}

/// Gram-Schmidt orthonormal columns, independent of crate internals.
fn orthonormal_columns(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((n, p));
    for j in 0..p {
        let mut v: Array1<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for t in 0..j {
            let c = q.column(t).dot(&v);
            let col = q.column(t).to_owned();
            v.scaled_add(-c, &col);
        }
        let nrm = v.dot(&v).sqrt();
        q.column_mut(j).assign(&(v / nrm));
    }
    q
}

/// Criterion 1: the second simulation study at its published operating point
/// reproduces the reported averages within the stated tolerances.
#[test]
fn acceptance_1_table_1_reproduction() {
    let sim = Setup2Config {
        replicates: 200,
        seed: 0,
        ..Setup2Config::default()
    };
    // defaults: 15,000 steps, 5,000 burn-in, N = 100, p_o by cross validation
    let settings = PipelineSettings::default();
    let study = run_setup2_study(&sim, &settings).unwrap();

    let size_ok = (study.mean_map_size - 3.476).abs() <= 0.5;
    let rmse_ok = (study.mean_rmse - 1.138).abs() <= 0.10;
    let r_map_ok = (study.mean_r_map - 0.365).abs() <= 0.08;
    let ok = size_ok && rmse_ok && r_map_ok;
    report(
        "1 (Table 1 reproduction)",
        ok,
        &format!(
            "mean MAP size {:.3} (want 3.476±0.5), mean RMSE {:.3} (want 1.138±0.10), \
             mean r(MAP|y) {:.3} (want 0.365±0.08), {} replicates",
            study.mean_map_size,
            study.mean_rmse,
            study.mean_r_map,
            study.per_replicate.len()
        ),
    );
    assert!(ok);
}

/// Criterion 2: visit frequencies of the 200,000-step chain sit within total
/// variation 0.05 of the exhaustively enumerated posterior, on three seeds.
#[test]
fn acceptance_2_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let n = 25;
    let x = Array2::from_shape_fn((n, 8), |_| StandardNormal.sample(&mut rng));
    let y: Array1<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            1.2 * x[[i, 1]] - 0.9 * x[[i, 5]] + e
        })
        .collect();
    let d = standardize(&y.view(), &x.view(), false).unwrap();
    let p_o = 2;

    let mut orng = ChaCha8Rng::seed_from_u64(99);
    let post = enumerate_posterior(&d, p_o, 5, 50_000, &mut orng).unwrap();

    let w = ProposalWeights::uniform(8);
    let mut tvs = Vec::new();
    for seed in [1u64, 2, 3] {
        let cfg = ChainConfig {
            steps: 200_000,
            burn_in: 20_000,
            n_importance: 100,
            p_o,
            max_size: Some(5),
            seed,
            ..ChainConfig::default()
        };
        let (summary, _) = run_chain(&d, &w, cfg).unwrap();
        tvs.push(post.tv_distance(&summary.r_hat));
    }
    let ok = tvs.iter().all(|&tv| tv <= 0.05);
    report(
        "2 (oracle equivalence)",
        ok,
        &format!(
            "TV distances {:?} (want each <= 0.05; n=25, p=8, max_size=5, 200k steps, N_ref=50k)",
            tvs.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
    assert!(ok);
}

/// Criterion 3: the admissibility decision is one-sided sound against the
/// exact minimum, and the polished objective matches it on at least 90% of
/// random instances.
#[test]
fn acceptance_3_l0_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = L0Config::default();
    let trials = 1000;
    let mut done = 0;
    let mut false_negatives = 0;
    let mut equal = 0;
    while done < trials {
        let n = rng.random_range(8..=20);
        let p = rng.random_range(3..=8usize);
        let d = random_design(&mut rng, n, p);
        let size = rng.random_range(2..=p.min(n - 2).min(5));
        let mut idx: Vec<usize> = (0..p).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        idx.truncate(size);
        let m = ModelIndex::new(idx).unwrap();
        let Ok(fit) = fit_model(&d, &m) else { continue };
        if fit.rss <= 0.0 {
            continue;
        }
        let beta = sample_beta_t(&fit, d.n(), &mut rng, 1).row(0).to_owned();
        let target = d.columns(&m).dot(&beta);
        let kappa = size - 1;

        // soundness at the default threshold, with early exit active
        let p_o = rng.random_range(1..=4);
        let eps = default_epsilon(&fit, d.n(), d.p(), p_o);
        let verdict = eval_h(&d, &m, &beta.view(), eps, &fit, &cfg);
        let exact = brute_force_l0(&d, &target.view(), kappa).unwrap();
        if !verdict.admissible && exact.min_objective >= eps {
            false_negatives += 1;
        }

        // equality of the fully converged polished objective
        let mut warm = Array1::zeros(p);
        for (k, &j) in m.indices().iter().enumerate() {
            warm[j] = beta[k];
        }
        let out = l0_min_upper_bound(&d, &target.view(), kappa, &warm.view(), &cfg, 0.0);
        assert!(
            out.objective >= exact.min_objective - 1e-9 * (1.0 + exact.min_objective),
            "achieved objective below the exact minimum"
        );
        if (out.objective - exact.min_objective).abs() <= 1e-6 * (1.0 + exact.min_objective) {
            equal += 1;
        }
        done += 1;
    }
    let ok = false_negatives == 0 && equal * 10 >= trials * 9;
    report(
        "3 (L0 soundness)",
        ok,
        &format!(
            "{false_negatives} false inadmissibility verdicts (want 0), \
             polished objective equals the exact minimum on {equal}/{trials} (want >= 900)"
        ),
    );
    assert!(ok);
}

/// Criterion 4 (slow suite): the Setup-1 trend at n=100, p=100, rho=0 — the
/// true model is the modal MAP and carries at least five times the mean
/// probability of any competitor.
#[test]
#[ignore = "multi-hour Setup-1 study; run with cargo test -- --ignored"]
fn acceptance_4_setup1_trend() {
    let sim = Setup1Config {
        replicates: 50,
        seed: 0,
        ..Setup1Config::default()
    };
    let settings = PipelineSettings::default();
    let study = run_setup1_study(&sim, &settings).unwrap();

    let m_o = ModelIndex::new((0..8).collect()).unwrap();
    let true_mean = study.mean_model_prob.get(&m_o).copied().unwrap_or(0.0);
    let best_other = study
        .mean_model_prob
        .iter()
        .filter(|(m, _)| **m != m_o)
        .map(|(_, &v)| v)
        .fold(0.0_f64, f64::max);
    let correct_ok = study.proportion_correct > 0.5;
    let margin_ok = true_mean >= 5.0 * best_other;
    let ok = correct_ok && margin_ok;
    report(
        "4 (Setup-1 trend)",
        ok,
        &format!(
            "proportion correct {:.3} (want > 0.5), mean r(M_o|y) {:.4} vs best other {:.4} \
             (want >= 5x)",
            study.proportion_correct, true_mean, best_other
        ),
    );
    assert!(ok);
}

/// Criterion 5: definitional invariants — h = 0 whenever the model is
/// oversized or rank deficient (exhaustive at p = 6), the collinearity factor
/// equals |M| on orthogonal designs, and the per-model quantities are
/// invariant under row rotations.
#[test]
fn acceptance_5_definitional_invariants() {
    // exhaustive oversize/rank-deficiency sweep on a p = 6 design with n = 4
    // rows and a planted duplicate direction
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let n = 4;
    let base = Array2::from_shape_fn((n, 5), |_| StandardNormal.sample(&mut rng));
    let mut x = Array2::<f64>::zeros((n, 6));
    x.column_mut(0).assign(&base.column(0));
    x.column_mut(1).assign(&base.column(0).mapv(|v| -3.0 * v));
    for j in 2..6 {
        x.column_mut(j).assign(&base.column(j - 1));
    }
    let y: Array1<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let d = standardize(&y.view(), &x.view(), false).unwrap();
    let mut h_zero_ok = true;
    for mask in 1u32..64 {
        let idx: Vec<usize> = (0..6).filter(|&j| mask & (1 << j) != 0).collect();
        let m = ModelIndex::new(idx).unwrap();
        let must_fail = m.len() > n || (m.contains(0) && m.contains(1));
        match fit_model(&d, &m) {
            // fit failure is exactly the h = 0 convention
            Err(Error::RankDeficient) => {}
            Err(_) => h_zero_ok = false,
            Ok(_) => {
                if must_fail {
                    h_zero_ok = false;
                }
            }
        }
    }
    // the eval_h guard itself, for an oversized model with a manufactured fit
    let oversized = ModelIndex::new((0..5).collect()).unwrap();
    let fake = ModelFit {
        beta_hat: Array1::zeros(5),
        rss: 1.0,
        sigma2_hat: 1.0,
        lambda: 5.0,
        chol: Array2::eye(5),
        logdet: 0.0,
    };
    let guard = eval_h(
        &d,
        &oversized,
        &Array1::ones(5).view(),
        0.5,
        &fake,
        &L0Config::default(),
    );
    h_zero_ok &= !guard.admissible && guard.iterations == 0;

    // Lambda = |M| on an orthogonal design, every subset up to size 4
    let q = orthonormal_columns(&mut rng, 12, 6);
    let yq: Array1<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
    let dq = standardize(&yq.view(), &q.view(), false).unwrap();
    let mut lambda_ok = true;
    for mask in 1u32..64 {
        let idx: Vec<usize> = (0..6).filter(|&j| mask & (1 << j) != 0).collect();
        if idx.len() > 4 {
            continue;
        }
        let m = ModelIndex::new(idx).unwrap();
        let fit = fit_model(&dq, &m).unwrap();
        if (fit.lambda - m.len() as f64).abs() > 1e-10 {
            lambda_ok = false;
        }
    }

    // row-orthogonal invariance of RSS, Lambda, and the analytic score
    let d0 = random_design(&mut rng, 12, 5);
    let u = orthonormal_columns(&mut rng, 12, 12);
    let (y_raw, x_raw) = d0.raw_data();
    let d1 = standardize(&u.dot(&y_raw).view(), &u.dot(&x_raw).view(), false).unwrap();
    let mut invariance_ok = true;
    for mask in 1u32..32 {
        let idx: Vec<usize> = (0..5).filter(|&j| mask & (1 << j) != 0).collect();
        if idx.len() > 3 {
            continue;
        }
        let m = ModelIndex::new(idx).unwrap();
        let f0 = fit_model(&d0, &m).unwrap();
        let f1 = fit_model(&d1, &m).unwrap();
        let rss_close = (f0.rss - f1.rss).abs() <= 1e-8 * (1.0 + f0.rss);
        let lam_close = (f0.lambda - f1.lambda).abs() <= 1e-8 * (1.0 + f0.lambda);
        let s0 = log_base_score(&f0, 12, &m).unwrap();
        let s1 = log_base_score(&f1, 12, &m).unwrap();
        let score_close = (s0 - s1).abs() <= 1e-8 * (1.0 + s0.abs());
        if !(rss_close && lam_close && score_close) {
            invariance_ok = false;
        }
    }

    let ok = h_zero_ok && lambda_ok && invariance_ok;
    report(
        "5 (definitional invariants)",
        ok,
        &format!(
            "h-zero convention exhaustive at p=6: {h_zero_ok}, orthogonal Lambda=|M|: \
             {lambda_ok}, row-rotation invariance: {invariance_ok}"
        ),
    );
    assert!(ok);
}

/// Criterion 6: sampler micro-laws — bit-exact rejections, fixed-seed
/// determinism of full runs, and the multivariate-t moment checks.
#[test]
fn acceptance_6_sampler_micro_laws() {
    // bit-exact rejection
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let d = random_design(&mut rng, 20, 6);
    let w = ProposalWeights::uniform(6);
    let cfg = ChainConfig {
        steps: 400,
        burn_in: 0,
        n_importance: 20,
        p_o: 2,
        max_size: Some(3),
        seed: 5,
        ..ChainConfig::default()
    };
    let mut chain = Chain::new(&d, &w, cfg.clone()).unwrap();
    let mut rejections = 0;
    let mut rejection_ok = true;
    for _ in 0..400 {
        let model = chain.state().model.clone();
        let e_h = chain.state().score.e_h_hat.to_bits();
        let score = chain.state().score.log_score.to_bits();
        let beta: Vec<u64> = chain.state().fit.beta_hat.iter().map(|v| v.to_bits()).collect();
        let out = chain.step();
        if !out.accepted {
            rejections += 1;
            let same = chain.state().model == model
                && chain.state().score.e_h_hat.to_bits() == e_h
                && chain.state().score.log_score.to_bits() == score
                && chain
                    .state()
                    .fit
                    .beta_hat
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
                    == beta;
            rejection_ok &= same;
        }
    }
    rejection_ok &= rejections > 0;

    // fixed-seed determinism of a full pipeline run
    let settings = PipelineSettings {
        chain: ChainConfig {
            steps: 600,
            burn_in: 200,
            n_importance: 10,
            max_size: Some(3),
            ..ChainConfig::default()
        },
        p_o: None,
        cv: CvConfig {
            folds: 5,
            p_o_grid: vec![1, 2, 3],
            cv_steps: 60,
            cv_burn_in: 20,
            cv_n_importance: 10,
            seed: 0,
        },
        elastic_net: ElasticNetConfig::default(),
    };
    let a = run_selection(&d, &settings, 77).unwrap();
    let b = run_selection(&d, &settings, 77).unwrap();
    let determinism_ok = a.p_o == b.p_o
        && a.summary.visit_counts == b.summary.visit_counts
        && a.summary.map_model == b.summary.map_model;

    // multivariate-t moments
    let m = ModelIndex::new(vec![0, 2, 4]).unwrap();
    let fit = fit_model(&d, &m).unwrap();
    let count = 200_000;
    let draws = sample_beta_t(&fit, d.n(), &mut rng, count);
    let k = 3;
    let nu = (d.n() - k) as f64;
    let xm = d.columns(&m);
    let gram = xm.t().dot(&xm);
    // 3x3 inverse via cofactors
    let det = gram[[0, 0]] * (gram[[1, 1]] * gram[[2, 2]] - gram[[1, 2]] * gram[[2, 1]])
        - gram[[0, 1]] * (gram[[1, 0]] * gram[[2, 2]] - gram[[1, 2]] * gram[[2, 0]])
        + gram[[0, 2]] * (gram[[1, 0]] * gram[[2, 1]] - gram[[1, 1]] * gram[[2, 0]]);
    let mut inv = Array2::<f64>::zeros((3, 3));
    for a_ in 0..3 {
        for b_ in 0..3 {
            let mut sub = Vec::new();
            for i in 0..3 {
                for j in 0..3 {
                    if i != a_ && j != b_ {
                        sub.push(gram[[i, j]]);
                    }
                }
            }
            let minor = sub[0] * sub[3] - sub[1] * sub[2];
            inv[[b_, a_]] = if (a_ + b_) % 2 == 0 { minor } else { -minor } / det;
        }
    }
    let mut mean_ok = true;
    let mut means = vec![0.0; k];
    for j in 0..k {
        means[j] = draws.column(j).sum() / count as f64;
        let var = fit.sigma2_hat * inv[[j, j]] * nu / (nu - 2.0);
        let se = (var / count as f64).sqrt();
        if (means[j] - fit.beta_hat[j]).abs() >= 4.0 * se {
            mean_ok = false;
        }
    }
    let mut cov = Array2::<f64>::zeros((k, k));
    for row in draws.rows() {
        for a_ in 0..k {
            for b_ in 0..k {
                cov[[a_, b_]] += (row[a_] - means[a_]) * (row[b_] - means[b_]);
            }
        }
    }
    cov.mapv_inplace(|v| v / (count as f64 - 1.0));
    let want = inv.mapv(|v| v * fit.sigma2_hat * nu / (nu - 2.0));
    let num: f64 = (&cov - &want).iter().map(|v| v * v).sum::<f64>().sqrt();
    let den: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cov_ok = num / den < 0.05;

    let ok = rejection_ok && determinism_ok && mean_ok && cov_ok;
    report(
        "6 (sampler micro-laws)",
        ok,
        &format!(
            "bit-exact rejections over {rejections} events: {rejection_ok}, fixed-seed \
             determinism: {determinism_ok}, t mean within 4se: {mean_ok}, t covariance \
             within 5%: {cov_ok} (rel err {:.4})",
            num / den
        ),
    );
    assert!(ok);
}
