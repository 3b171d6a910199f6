//! Replicated sampling-and-fitting studies and their result bundles.
//!
//! A bundle directory holds `summary.json`, `metrics.csv`, one draws CSV and
//! one sample log per replication under `draws/` and `samples/`, and
//! `map.csv` with the posterior mean count map of the first completed
//! replication. Nothing in it depends on timing or thread count.

mod config;
mod gridfile;

pub use config::{Baseline, ExperimentConfig, Scenario, SPEC_VERSION};
pub use gridfile::{load_population_csv, save_population_csv, GridFile};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::simulate_covariate;
use crate::error::{AcsError, Result};
use crate::estimate::{fit_summary, raj_estimator, summarize_metrics, FitSummary, MetricsSummary, PosteriorSummary, RajEstimate};
use crate::grid::GridSpec;
use crate::mcmc::{pooled_eta_mean, run_chains, write_draws_csv, ChainOutput};
use crate::population::{generate_population, ModelParams, PopulationGrid};
use crate::seed::{mix_seed, stream_seed, Stream};
use crate::survey::{acs_draw, two_stage_sample, SampleLog, SamplingMode, WeightField};

/// Outcome of one completed replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub true_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_params: Option<ModelParams>,
    pub nonempty_networks: usize,
    pub stage1_retries: usize,
    /// Samples drawn before one met the nonempty-network condition.
    pub condition_attempts: usize,
    pub total: PosteriorSummary,
    pub alpha: PosteriorSummary,
    pub beta: PosteriorSummary,
    pub geweke_total: Vec<Option<f64>>,
    pub theta_acceptance: Vec<f64>,
    pub latent_acceptance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raj: Option<RajEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raj_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub error: String,
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: String,
    pub quantity: String,
    #[serde(flatten)]
    pub metrics: MetricsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub m1: usize,
    pub m2: usize,
    pub completed: Vec<ReplicationResult>,
    pub failures: Vec<ReplicationFailure>,
    pub metrics: Vec<MetricsRow>,
    /// Number of nonempty networks in the final sample -> replications.
    pub network_histogram: BTreeMap<usize, usize>,
}

impl ExperimentResults {
    pub fn metrics_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["estimator", "quantity"];
        header.extend(MetricsSummary::CSV_HEADER);
        w.write_record(&header)?;
        for row in &self.metrics {
            let mut rec = vec![row.estimator.clone(), row.quantity.clone()];
            rec.extend(row.metrics.csv_fields());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn metric(&self, estimator: &str, quantity: &str) -> Option<&MetricsSummary> {
        self.metrics
            .iter()
            .find(|r| r.estimator == estimator && r.quantity == quantity)
            .map(|r| &r.metrics)
    }
}

/// Everything a completed replication leaves behind.
struct Artifacts {
    result: ReplicationResult,
    log: SampleLog,
    chains: Vec<ChainOutput>,
}

/// Fixed part of a study shared by all replications.
struct Setup {
    grid: GridSpec,
    fixed: Option<PopulationGrid>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    match &cfg.scenario {
        Scenario::Generate { rows, cols, alpha, beta, theta, gp, covariate_seed, population_seed, regenerate } => {
            let grid = GridSpec::new(*rows, *cols)?;
            let fixed = if *regenerate {
                None
            } else {
                let cov = simulate_covariate(&grid, gp, *covariate_seed)?;
                let params = ModelParams { theta: theta.clone(), alpha: *alpha, beta: *beta, rho: None };
                Some(generate_population(&grid, &cov, &params, None, *population_seed)?)
            };
            Ok(Setup { grid, fixed })
        }
        Scenario::Load { path, center } => {
            let pop = load_population_csv(path, *center)?;
            if !pop.is_usable() {
                return Err(AcsError::Config(format!("{} holds no nonempty cell", path.display())));
            }
            Ok(Setup { grid: pop.grid, fixed: Some(pop) })
        }
    }
}

fn population_for(cfg: &ExperimentConfig, setup: &Setup, seed: u64) -> Result<PopulationGrid> {
    if let Some(pop) = &setup.fixed {
        return Ok(pop.clone());
    }
    let Scenario::Generate { alpha, beta, theta, gp, covariate_seed, .. } = &cfg.scenario else {
        unreachable!("loaded scenarios are always fixed");
    };
    let cov = simulate_covariate(&setup.grid, gp, *covariate_seed)?;
    let params = ModelParams { theta: theta.clone(), alpha: *alpha, beta: *beta, rho: None };
    generate_population(&setup.grid, &cov, &params, None, stream_seed(seed, Stream::Population))
}

fn run_replication(cfg: &ExperimentConfig, setup: &Setup, replication: usize) -> Result<Artifacts> {
    let seed = mix_seed(cfg.master_seed, replication as u64);
    let pop = population_for(cfg, setup, seed)?;
    let (m1, m2) = cfg.stage_sizes();

    let mut attempts = 0;
    let outcome = loop {
        let sample_seed = if attempts == 0 { seed } else { mix_seed(seed, 0x5EED_0000 + attempts as u64) };
        attempts += 1;
        let outcome = two_stage_sample(&pop, m1, m2, cfg.mode, &cfg.mcmc, sample_seed)?;
        match cfg.condition_networks {
            Some(target) if outcome.log.nonempty_networks() != target => {
                if attempts >= cfg.condition_budget {
                    return Err(AcsError::ConditioningExhausted { target, retries: attempts });
                }
            }
            _ => break outcome,
        }
    };
    let log = outcome.log;
    let chains = run_chains(&log, &pop.covariates, &cfg.mcmc, stream_seed(seed, Stream::FinalFit))?;
    let fit: FitSummary = fit_summary(&chains)?;

    let (raj, raj_error) = if cfg.baselines.contains(&Baseline::Raj) {
        let weights = WeightField::constant(pop.grid.cells(), 1.0);
        match acs_draw(&pop, &weights, cfg.m, SamplingMode::Network, stream_seed(seed, Stream::Baseline))
            .and_then(|l| raj_estimator(&l))
        {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    let result = ReplicationResult {
        replication,
        seed,
        true_total: pop.total(),
        true_params: pop.true_params.clone(),
        nonempty_networks: log.nonempty_networks(),
        stage1_retries: log.stage1_retries,
        condition_attempts: attempts,
        total: fit.total,
        alpha: fit.alpha,
        beta: fit.beta,
        geweke_total: fit.geweke_total,
        theta_acceptance: fit.acceptance.iter().map(|a| a.theta).collect(),
        latent_acceptance: fit.acceptance.iter().map(|a| a.latent).collect(),
        raj,
        raj_error,
    };
    Ok(Artifacts { result, log, chains })
}

fn aggregate(completed: &[ReplicationResult]) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    let mut push = |estimator: &str, quantity: &str, pairs: Vec<(PosteriorSummary, f64)>| -> Result<()> {
        if !pairs.is_empty() {
            rows.push(MetricsRow {
                estimator: estimator.into(),
                quantity: quantity.into(),
                metrics: summarize_metrics(&pairs)?,
            });
        }
        Ok(())
    };
    push("model", "T", completed.iter().map(|r| (r.total, r.true_total as f64)).collect())?;
    let with_truth: Vec<_> = completed.iter().filter_map(|r| r.true_params.as_ref().map(|p| (r, p))).collect();
    push("model", "alpha", with_truth.iter().map(|(r, p)| (r.alpha, p.alpha)).collect())?;
    push("model", "beta", with_truth.iter().map(|(r, p)| (r.beta, p.beta)).collect())?;
    push(
        "raj",
        "T",
        completed
            .iter()
            .filter_map(|r| {
                r.raj.map(|e| {
                    let (lo, hi) = e.ci.unwrap_or((e.estimate, e.estimate));
                    let s = PosteriorSummary { mean: e.estimate, median: e.estimate, ci_low: lo, ci_high: hi, n_draws: 1 };
                    (s, r.true_total as f64)
                })
            })
            .collect(),
    )?;
    Ok(rows)
}

/// Run every replication and, when `out` is given, write the bundle there.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentResults> {
    cfg.validate()?;
    let setup = setup(cfg)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("draws"))?;
        fs::create_dir_all(dir.join("samples"))?;
    }
    let outcomes: Vec<Result<Artifacts>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let art = run_replication(cfg, &setup, r)?;
            if let Some(dir) = out {
                let file = fs::File::create(dir.join("draws").join(format!("rep_{r:04}.csv")))?;
                write_draws_csv(&art.chains, std::io::BufWriter::new(file))?;
                fs::write(dir.join("samples").join(format!("rep_{r:04}.json")), art.log.to_json()?)?;
            }
            Ok(art)
        })
        .collect();

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    let mut first: Option<Artifacts> = None;
    for (replication, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(art) => {
                completed.push(art.result.clone());
                if first.is_none() {
                    first = Some(art);
                }
            }
            Err(e) => {
                log::warn!("replication {replication} failed: {e}");
                failures.push(ReplicationFailure { replication, error: e.to_string() });
            }
        }
    }
    if completed.is_empty() {
        return Err(AcsError::ReplicationsExhausted { failed: failures.len() });
    }
    if !failures.is_empty() {
        log::warn!("{} of {} replications excluded", failures.len(), cfg.replications);
    }
    let mut network_histogram = BTreeMap::new();
    for r in &completed {
        *network_histogram.entry(r.nonempty_networks).or_insert(0) += 1;
    }
    let (m1, m2) = cfg.stage_sizes();
    let results = ExperimentResults {
        config: cfg.clone(),
        m1,
        m2,
        metrics: aggregate(&completed)?,
        completed,
        failures,
        network_histogram,
    };
    if let Some(dir) = out {
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&results)?)?;
        results.metrics_csv(fs::File::create(dir.join("metrics.csv"))?)?;
        if let Some(art) = &first {
            export_posterior_map(&art.chains, &art.log, &dir.join("map.csv"))?;
        }
    }
    Ok(results)
}

/// Rows of the posterior map: `(cell, mean count, sampled, border)`.
pub fn posterior_map(chains: &[ChainOutput], log: &SampleLog) -> Vec<(usize, f64, bool, bool)> {
    map_rows(&pooled_eta_mean(chains), log)
}

fn map_rows(eta: &[f64], log: &SampleLog) -> Vec<(usize, f64, bool, bool)> {
    let obs = log.observed();
    (0..log.grid.cells())
        .map(|c| {
            let border = obs.border[c];
            let mean = if border { 0.0 } else { eta.get(c).copied().unwrap_or(0.0) };
            (c, mean, obs.sampled[c], border)
        })
        .collect()
}

/// Write `cell_id,row,col,posterior_mean_eta,sampled_flag,border_flag`.
pub fn export_posterior_map(chains: &[ChainOutput], log: &SampleLog, path: &Path) -> Result<()> {
    write_posterior_map(&pooled_eta_mean(chains), log, path)
}

/// As [`export_posterior_map`], from per-cell posterior means already pooled.
pub fn write_posterior_map(eta: &[f64], log: &SampleLog, path: &Path) -> Result<()> {
    if eta.len() != log.grid.cells() {
        return Err(AcsError::Domain(format!("{} posterior means for {} cells", eta.len(), log.grid.cells())));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell_id", "row", "col", "posterior_mean_eta", "sampled_flag", "border_flag"])?;
    for (c, mean, sampled, border) in map_rows(eta, log) {
        let (r, col) = log.grid.row_col(c);
        w.write_record([
            c.to_string(),
            r.to_string(),
            col.to_string(),
            mean.to_string(),
            u8::from(sampled).to_string(),
            u8::from(border).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
