//! Library half of the command-line front door: CSV ingestion, result
//! documents, and the mode dispatcher. The binary in `main.rs` only parses
//! flags and maps errors to exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::Serialize;
use thiserror::Error;

use fidsel::{
    enumerate_posterior, run_selection, run_setup1_study, run_setup2_study, standardize,
    ChainConfig, CvConfig, ElasticNetConfig, ModelIndex, PipelineSettings, ReplicateMetrics,
    Setup1Config, Setup2Config, StandardizedDesign, StudyResult,
};

/// Exit code 1: bad input or configuration. Exit code 2: numerical or
/// initialization failure during a run.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Run(_) => 2,
        }
    }
}

impl From<fidsel::Error> for CliError {
    fn from(e: fidsel::Error) -> Self {
        use fidsel::Error::*;
        match e {
            DimensionMismatch(_) | ZeroNormColumn { .. } | InvalidModel(_) | InvalidConfig(_)
            | EnumerationGuard(_) => CliError::Input(e.to_string()),
            RankDeficient | Degenerate | InitializationFailed(_) => CliError::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Select,
    Cv,
    Sim1,
    Sim2,
    Oracle,
}

/// Fully resolved run configuration; echoed verbatim into the result
/// document so a run can be reproduced from its output alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub steps: usize,
    pub burn_in: usize,
    pub n_importance: usize,
    /// Fixed prior-belief size; `None` selects it by cross validation.
    pub p_o: Option<usize>,
    pub max_model_size: Option<usize>,
    pub center: bool,
    pub seed: u64,
    pub threads: Option<usize>,
    pub replicates: Option<usize>,
    pub p: usize,
    pub rho: f64,
}

impl RunConfig {
    fn validate(&self) -> CliResult<()> {
        if self.steps <= self.burn_in {
            return Err(CliError::Input(format!(
                "steps ({}) must exceed burn-in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.n_importance == 0 {
            return Err(CliError::Input("n-importance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(CliError::Input(format!("rho must lie in [0,1), got {}", self.rho)));
        }
        if matches!(self.mode, Mode::Select | Mode::Cv | Mode::Oracle) && self.input.is_none() {
            return Err(CliError::Input(format!(
                "mode {:?} needs --input",
                self.mode
            )));
        }
        Ok(())
    }

    fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            chain: ChainConfig {
                steps: self.steps,
                burn_in: self.burn_in,
                n_importance: self.n_importance,
                max_size: self.max_model_size,
                ..ChainConfig::default()
            },
            p_o: self.p_o,
            cv: CvConfig::default(),
            elastic_net: ElasticNetConfig::default(),
        }
    }
}

/// Parses a UTF-8 CSV with a header row; the first column is the response,
/// the remaining columns are numeric covariates.
pub fn ingest_csv(path: &Path) -> CliResult<(Array1<f64>, Array2<f64>, Vec<String>)> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 {
        return Err(CliError::Input(format!(
            "{}: need a response column and at least one covariate",
            path.display()
        )));
    }
    let names: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    let p = names.len() - 1;

    let mut y = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if record.len() != p + 1 {
            return Err(CliError::Input(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 2,
                record.len(),
                p + 1
            )));
        }
        let mut row = Vec::with_capacity(p);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "{}: row {}, column {} ({:?}): not a number: {:?}",
                    path.display(),
                    i + 2,
                    j + 1,
                    names[j],
                    field
                ))
            })?;
            if j == 0 {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let n = rows.len();
    let mut x = Array2::<f64>::zeros((n, p));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok((Array1::from(y), x, names))
}

/// Writes a dataset in the same layout `ingest_csv` reads, at full
/// round-trip precision.
pub fn write_dataset_csv(
    path: &Path,
    y: &Array1<f64>,
    x: &Array2<f64>,
    names: &[String],
) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(&names.join(","));
    out.push('\n');
    for i in 0..x.nrows() {
        out.push_str(&format!("{}", y[i]));
        for j in 0..x.ncols() {
            out.push_str(&format!(",{}", x[[i, j]]));
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Writes via a temp file in the destination directory plus an atomic
/// rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            tempfile::NamedTempFile::new_in(d)?
        }
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ModelReport {
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    pub r_hat: f64,
    pub visits: u64,
}

#[derive(Debug, Serialize)]
pub struct MapReport {
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    pub r_hat: f64,
    /// Coefficients mapped back to the raw covariate scale.
    pub coefficients: Vec<f64>,
    /// Reconstructed intercept; zero when centering was off.
    pub intercept: f64,
}

#[derive(Debug, Serialize)]
pub struct OracleRow {
    pub indices: Vec<usize>,
    pub log_base: f64,
    pub e_h_ref: f64,
    pub prob: f64,
}

#[derive(Debug, Serialize)]
pub struct StudySummary {
    pub replicates: usize,
    pub mean_map_size: f64,
    pub mean_rmse: f64,
    pub mean_r_map: f64,
    pub mean_r_true: f64,
    pub proportion_correct: f64,
}

/// The single structured result document every mode emits.
#[derive(Debug, Serialize)]
pub struct ResultDoc {
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_o: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bic_table: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_models: Option<Vec<ModelReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_model: Option<MapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inclusion_probabilities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_table: Option<Vec<OracleRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<StudySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate_metrics: Option<Vec<ReplicateMetrics>>,
}

impl ResultDoc {
    fn new(config: RunConfig) -> Self {
        Self {
            config,
            p_o: None,
            bic_table: None,
            top_models: None,
            map_model: None,
            inclusion_probabilities: None,
            oracle_table: None,
            summary: None,
            replicate_metrics: None,
        }
    }
}

fn covariate_names(names: &[String], m: &ModelIndex) -> Vec<String> {
    m.indices().iter().map(|&j| names[j + 1].clone()).collect()
}

fn load_design(cfg: &RunConfig) -> CliResult<(StandardizedDesign, Vec<String>)> {
    let input = cfg.input.as_ref().expect("validated");
    let (y, x, names) = ingest_csv(input)?;
    let d = standardize(&y.view(), &x.view(), cfg.center)?;
    Ok((d, names))
}

fn run_select(cfg: &RunConfig, doc: &mut ResultDoc) -> CliResult<()> {
    let (d, names) = load_design(cfg)?;
    let outcome = run_selection(&d, &cfg.pipeline_settings(), cfg.seed)?;
    doc.p_o = Some(outcome.p_o);
    doc.bic_table = outcome
        .bic_table
        .as_ref()
        .map(|t| t.rows().into_iter().map(|r| r.to_vec()).collect());

    let mut models: Vec<ModelReport> = outcome
        .summary
        .r_hat
        .iter()
        .map(|(m, &r)| ModelReport {
            indices: m.indices().to_vec(),
            names: covariate_names(&names, m),
            r_hat: r,
            visits: outcome.summary.visit_counts[m],
        })
        .collect();
    models.sort_by(|a, b| b.r_hat.total_cmp(&a.r_hat).then(a.indices.cmp(&b.indices)));
    models.truncate(20);

    let map = &outcome.summary.map_model;
    let fit = fidsel::fit_model(&d, map)?;
    let (coefs, intercept) = d.raw_scale_coefficients(map, &fit.beta_hat.view());
    doc.map_model = Some(MapReport {
        indices: map.indices().to_vec(),
        names: covariate_names(&names, map),
        r_hat: outcome.summary.r_hat[map],
        coefficients: coefs.to_vec(),
        intercept,
    });
    doc.top_models = Some(models);
    doc.inclusion_probabilities = Some(outcome.summary.inclusion_prob.clone());
    Ok(())
}

fn run_cv(cfg: &RunConfig, doc: &mut ResultDoc) -> CliResult<()> {
    let (d, _) = load_design(cfg)?;
    let settings = cfg.pipeline_settings();
    let weights = fidsel::elastic_net_weights(&d, &settings.elastic_net)?;
    let out = fidsel::select_p_o(&d, &weights, &settings.cv, &settings.chain)?;
    doc.p_o = Some(out.p_o_star);
    doc.bic_table = Some(out.bic_table.rows().into_iter().map(|r| r.to_vec()).collect());
    Ok(())
}

fn run_oracle(cfg: &RunConfig, doc: &mut ResultDoc) -> CliResult<()> {
    let (d, _) = load_design(cfg)?;
    let max_size = cfg
        .max_model_size
        .unwrap_or_else(|| (d.n() as f64).sqrt().floor() as usize);
    // the reference estimator needs a larger sample than the chain default
    let n_ref = cfg.n_importance.max(1000);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let post = enumerate_posterior(&d, cfg.p_o.unwrap_or(1), max_size, n_ref, &mut rng)?;
    doc.p_o = Some(cfg.p_o.unwrap_or(1));
    doc.oracle_table = Some(
        post.table
            .iter()
            .map(|(m, mass)| OracleRow {
                indices: m.indices().to_vec(),
                log_base: mass.log_base,
                e_h_ref: mass.e_h_ref,
                prob: mass.prob,
            })
            .collect(),
    );
    Ok(())
}

fn study_summary(study: &StudyResult, replicates: usize) -> StudySummary {
    StudySummary {
        replicates,
        mean_map_size: study.mean_map_size,
        mean_rmse: study.mean_rmse,
        mean_r_map: study.mean_r_map,
        mean_r_true: study.mean_r_true,
        proportion_correct: study.proportion_correct,
    }
}

/// One plot-data row per replicate, mirroring the benchmark figure panels.
fn plot_csv(setup: &str, p: usize, rho: f64, study: &StudyResult) -> String {
    let mut out = String::from(
        "setup,p,rho,replicate,seed,r_map,r_true,correct_selection,map_size,rmse_test,p_o\n",
    );
    for (i, m) in study.per_replicate.iter().enumerate() {
        out.push_str(&format!(
            "{setup},{p},{rho},{i},{},{},{},{},{},{},{}\n",
            m.seed, m.r_map, m.r_true, m.correct_selection as u8, m.map_size, m.rmse_test, m.p_o
        ));
    }
    out
}

fn plot_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    name.push_str(".plot.csv");
    output.with_file_name(name)
}

fn run_sim(cfg: &RunConfig, doc: &mut ResultDoc) -> CliResult<()> {
    let settings = cfg.pipeline_settings();
    let (study, setup, p, rho) = match cfg.mode {
        Mode::Sim1 => {
            let sim = Setup1Config {
                p: cfg.p,
                rho: cfg.rho,
                replicates: cfg.replicates.unwrap_or(50),
                seed: cfg.seed,
                ..Setup1Config::default()
            };
            (run_setup1_study(&sim, &settings)?, "sim1", sim.p, sim.rho)
        }
        Mode::Sim2 => {
            let sim = Setup2Config {
                replicates: cfg.replicates.unwrap_or(200),
                seed: cfg.seed,
                ..Setup2Config::default()
            };
            (run_setup2_study(&sim, &settings)?, "sim2", 9, 0.0)
        }
        _ => unreachable!(),
    };
    doc.summary = Some(study_summary(&study, study.per_replicate.len()));
    write_atomic(
        &plot_path(&cfg.output),
        plot_csv(setup, p, rho, &study).as_bytes(),
    )?;
    doc.replicate_metrics = Some(study.per_replicate);
    Ok(())
}

/// Executes the requested mode and writes the result document atomically.
pub fn run(cfg: RunConfig) -> CliResult<()> {
    cfg.validate()?;
    let mut doc = ResultDoc::new(cfg.clone());
    match cfg.mode {
        Mode::Select => run_select(&cfg, &mut doc)?,
        Mode::Cv => run_cv(&cfg, &mut doc)?,
        Mode::Oracle => run_oracle(&cfg, &mut doc)?,
        Mode::Sim1 | Mode::Sim2 => run_sim(&cfg, &mut doc)?,
    }
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Run(format!("serialization failed: {e}")))?;
    write_atomic(&cfg.output, json.as_bytes())?;
    Ok(())
}
