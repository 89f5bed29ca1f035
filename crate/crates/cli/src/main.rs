use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use fidsel_cli::{run, Mode, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Select,
    Cv,
    Sim1,
    Sim2,
    Oracle,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Select => Mode::Select,
            ModeArg::Cv => Mode::Cv,
            ModeArg::Sim1 => Mode::Sim1,
            ModeArg::Sim2 => Mode::Sim2,
            ModeArg::Oracle => Mode::Oracle,
        }
    }
}

/// Variable selection for Gaussian linear models via epsilon-admissible
/// subsets.
#[derive(Parser, Debug)]
#[command(name = "fidsel", version, about)]
struct Args {
    /// What to run: select or cv on a CSV, a simulation study, or the
    /// exhaustive enumeration oracle.
    #[arg(long, value_enum)]
    mode: ModeArg,

    /// Input CSV (header row; first column is the response).
    #[arg(long)]
    input: Option<PathBuf>,

    /// Where to write the JSON result document.
    #[arg(long)]
    output: PathBuf,

    /// MCMC steps for the main chain.
    #[arg(long, default_value_t = 15_000)]
    steps: usize,

    /// Discarded initial steps.
    #[arg(long = "burn-in", default_value_t = 5_000)]
    burn_in: usize,

    /// Importance samples per proposal (N); the oracle mode uses
    /// max(this, 1000) as its reference sample size.
    #[arg(long = "n-importance", default_value_t = 100)]
    n_importance: usize,

    /// Fix the prior-belief size p_o and skip cross validation.
    #[arg(long = "p-o")]
    p_o: Option<usize>,

    /// Largest model the sampler may visit (default floor(sqrt(n))).
    #[arg(long = "max-model-size")]
    max_model_size: Option<usize>,

    /// Center y and X before scaling (default for CSV inputs).
    #[arg(long, overrides_with = "no_center")]
    center: bool,

    /// Skip centering.
    #[arg(long, overrides_with = "center")]
    no_center: bool,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Replicates for the simulation modes (default 50 for sim1, 200 for
    /// sim2).
    #[arg(long)]
    replicates: Option<usize>,

    /// Number of covariates for sim1.
    #[arg(long, default_value_t = 100)]
    p: usize,

    /// Exchangeable design correlation for sim1.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();

    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }

    // centering defaults on for ingested data; simulations generate their
    // own intercept-free designs
    let center = if args.no_center { false } else { true };

    let cfg = RunConfig {
        mode: args.mode.into(),
        input: args.input,
        output: args.output,
        steps: args.steps,
        burn_in: args.burn_in,
        n_importance: args.n_importance,
        p_o: args.p_o,
        max_model_size: args.max_model_size,
        center,
        seed: args.seed,
        threads: args.threads,
        replicates: args.replicates,
        p: args.p,
        rho: args.rho,
    };

    match run(cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
