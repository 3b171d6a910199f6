//! `acs`: generate populations, draw adaptive cluster samples, fit the
//! model and run replicated studies.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acs_core::covariate::{simulate_covariate, GpConfig};
use acs_core::estimate::{fit_summary, geweke_z_with, FitSummary, SpectralMethod, GEWEKE_FRAC_A, GEWEKE_FRAC_B};
use acs_core::experiment::{
    export_posterior_map, load_population_csv, run_experiment, save_population_csv, write_posterior_map,
    ExperimentConfig, Scenario,
};
use acs_core::grid::GridSpec;
use acs_core::mcmc::{read_draws_csv, run_chains, write_draws_csv, McmcConfig};
use acs_core::population::{generate_population, ModelParams};
use acs_core::survey::{stage_sizes, two_stage_sample, SampleLog, SamplingMode};
use acs_core::AcsError;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "acs", version, about = "Adaptive cluster sampling with a disaggregated Bayesian model")]
struct Cli {
    /// Worker threads for chains and replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only report errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a population and write it as a grid CSV.
    Generate(GenerateArgs),
    /// Draw one two-stage sample from a population.
    Sample(SampleArgs),
    /// Fit the model to one sample.
    Fit(FitArgs),
    /// Run a replicated study from a config file.
    Experiment(ExperimentArgs),
    /// Geweke z-scores for every column of a draws CSV.
    Diagnose(DiagnoseArgs),
    /// Export the posterior mean count map of a fit.
    Map(MapArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Take the grid and parameters from the scenario of an experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    rows: usize,
    #[arg(long, default_value_t = 20)]
    cols: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Intercept and slope of the count intensity.
    #[arg(long, value_delimiter = ',', default_values_t = [2.7, 0.5])]
    theta: Vec<f64>,
    /// Seed of the covariate field.
    #[arg(long, default_value_t = 0)]
    covariate_seed: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output grid CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Network,
    Cluster,
}

impl From<ModeArg> for SamplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Network => SamplingMode::Network,
            ModeArg::Cluster => SamplingMode::Cluster,
        }
    }
}

/// MCMC settings shared by the verbs that fit.
#[derive(Args)]
struct McmcArgs {
    /// Experiment config whose `[mcmc]` section (and design) to use.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 40,100 iterations, burn-in 100, thinning 20.
    #[arg(long)]
    paper_scale: bool,
}

impl McmcArgs {
    fn load(&self) -> Result<(Option<ExperimentConfig>, McmcConfig)> {
        let cfg = self.config.as_deref().map(ExperimentConfig::load).transpose()?;
        let mut mcmc = cfg.as_ref().map(|c| c.mcmc.clone()).unwrap_or_default();
        if self.paper_scale {
            mcmc = McmcConfig { priors: mcmc.priors, ..McmcConfig::paper_scale() };
        }
        Ok((cfg, mcmc))
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Grid CSV with counts.
    #[arg(long)]
    population: PathBuf,
    /// Total draws; overrides the config.
    #[arg(long)]
    m: Option<usize>,
    /// Share of draws in stage 1; overrides the config.
    #[arg(long)]
    stage1_fraction: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Center covariates before fitting stage 1.
    #[arg(long)]
    center: bool,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output sample log (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Grid CSV; only the covariates are used.
    #[arg(long)]
    population: PathBuf,
    /// Sample log written by `sample`.
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    center: bool,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for `draws.csv`, `fit.json` and `map.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// 40,100 iterations, burn-in 100, thinning 20.
    #[arg(long)]
    paper_scale: bool,
    /// Bundle directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Draws CSV written by `fit` or `experiment`.
    #[arg(long)]
    draws: PathBuf,
    /// Use a Bartlett lag window over this fraction of each segment instead
    /// of the autoregressive spectral estimate.
    #[arg(long, value_name = "FRACTION")]
    bartlett: Option<f64>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    sample: PathBuf,
    /// `fit.json` written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read_log(path: &Path) -> Result<SampleLog> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(SampleLog::from_json(&text)?)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (grid, params, gp, covariate_seed, seed) = match &args.config {
        Some(path) => match ExperimentConfig::load(path)?.scenario {
            Scenario::Generate { rows, cols, alpha, beta, theta, gp, covariate_seed, population_seed, .. } => {
                (GridSpec::new(rows, cols)?, ModelParams { theta, alpha, beta, rho: None }, gp, covariate_seed, population_seed)
            }
            Scenario::Load { .. } => return Err(AcsError::Config("the config loads its population".into()).into()),
        },
        None => (
            GridSpec::new(args.rows, args.cols)?,
            ModelParams { theta: args.theta.clone(), alpha: args.alpha, beta: args.beta, rho: None },
            GpConfig::default(),
            args.covariate_seed,
            args.seed,
        ),
    };
    let covariates = simulate_covariate(&grid, &gp, covariate_seed)?;
    let pop = generate_population(&grid, &covariates, &params, None, seed)?;
    save_population_csv(&pop, &args.out)?;
    log::info!(
        "wrote {}: T = {}, X = {}, P = {}",
        args.out.display(),
        pop.total(),
        pop.networks.x,
        pop.networks.p
    );
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let (cfg, mcmc) = args.mcmc.load()?;
    let m = args.m.or(cfg.as_ref().map(|c| c.m)).context("--m or --config is required")?;
    let fraction = args.stage1_fraction.or(cfg.as_ref().map(|c| c.stage1_fraction)).unwrap_or(0.5);
    let mode = args.mode.map(SamplingMode::from).or(cfg.as_ref().map(|c| c.mode)).unwrap_or_default();
    let (m1, m2) = stage_sizes(m, fraction).map_err(|e| AcsError::Config(e.to_string()))?;
    let pop = load_population_csv(&args.population, args.center)?;
    let outcome = two_stage_sample(&pop, m1, m2, mode, &mcmc, args.seed)?;
    fs::write(&args.out, outcome.log.to_json()?)?;
    log::info!("wrote {}: {} nonempty networks in {} draws", args.out.display(), outcome.log.nonempty_networks(), m);
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let (_, mcmc) = args.mcmc.load()?;
    let pop = load_population_csv(&args.population, args.center)?;
    let log = read_log(&args.sample)?;
    let chains = run_chains(&log, &pop.covariates, &mcmc, args.seed)?;
    fs::create_dir_all(&args.out)?;
    write_draws_csv(&chains, std::io::BufWriter::new(fs::File::create(args.out.join("draws.csv"))?))?;
    let summary = fit_summary(&chains)?;
    fs::write(args.out.join("fit.json"), serde_json::to_string_pretty(&summary)?)?;
    export_posterior_map(&chains, &log, &args.out.join("map.csv"))?;
    let t = &summary.total;
    log::info!("T: mean {:.1}, median {:.1}, 95% interval [{:.1}, {:.1}]", t.mean, t.median, t.ci_low, t.ci_high);
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.paper_scale {
        cfg.mcmc = McmcConfig { priors: cfg.mcmc.priors, ..McmcConfig::paper_scale() };
    }
    let results = run_experiment(&cfg, Some(&args.out))?;
    if !results.failures.is_empty() {
        log::warn!("{} of {} replications excluded", results.failures.len(), cfg.replications);
    }
    log::info!("{} replications completed; bundle in {}", results.completed.len(), args.out.display());
    if log::log_enabled!(log::Level::Info) {
        results.metrics_csv(std::io::stdout().lock())?;
    }
    Ok(())
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let draws = read_draws_csv(fs::File::open(&args.draws).with_context(|| format!("opening {}", args.draws.display()))?)?;
    if let Some(f) = args.bartlett {
        if !(f > 0.0 && f < 1.0) {
            bail!(AcsError::Config(format!("--bartlett must lie in (0, 1), got {f}")));
        }
    }
    let method = args.bartlett.map_or(SpectralMethod::Autoregressive, |fraction| SpectralMethod::Bartlett { fraction });
    let mut out = std::io::stdout().lock();
    writeln!(out, "chain,column,z")?;
    for (chain, columns) in draws.chains.iter().enumerate() {
        for (name, column) in draws.names.iter().zip(columns) {
            let z = geweke_z_with(column, GEWEKE_FRAC_A, GEWEKE_FRAC_B, method).map_or_else(|_| "NA".to_string(), |z| format!("{z:.3}"));
            writeln!(out, "{chain},{name},{z}")?;
        }
    }
    Ok(())
}

fn map(args: MapArgs) -> Result<()> {
    let log = read_log(&args.sample)?;
    let text = fs::read_to_string(&args.fit).with_context(|| format!("reading {}", args.fit.display()))?;
    let summary: FitSummary = serde_json::from_str(&text)?;
    write_posterior_map(&summary.eta_mean, &log, &args.out)?;
    Ok(())
}

/// 2 for bad configuration or input, 3 when replications or retries ran out.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<AcsError>() {
        Some(AcsError::Config(_) | AcsError::Parse { .. }) => 2,
        Some(
            AcsError::ReplicationsExhausted { .. }
            | AcsError::StageOneExhausted { .. }
            | AcsError::ConditioningExhausted { .. },
        ) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(AcsError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Sample(a) => sample(a),
        Command::Fit(a) => fit(a),
        Command::Experiment(a) => experiment(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Map(a) => map(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
