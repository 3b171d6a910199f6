//! Two-stage weighted design.
//!
//! Stage 1 draws with constant weights. The model is fitted to that sample,
//! and the posterior mean count of each cell becomes its stage-2 weight.
//! Cells already known after stage 1 get weight zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, AcsError, Result};
use crate::mcmc::{pooled_eta_mean, run_chains, ChainOutput, McmcConfig};
use crate::population::PopulationGrid;
use crate::seed::{stream_seed, Stream};

use super::{SampleLog, SamplingMode, StageWeights, Survey};

/// Attempts at a stage-1 sample that holds a nonempty network.
pub const STAGE1_RETRY_BUDGET: usize = 1000;

/// Stage-2 weight of an unknown cell whose posterior mean is zero.
///
/// Keeps every unknown cell reachable so stage 2 cannot run dry early.
pub const OMEGA_FLOOR: f64 = 1e-9;

/// A two-stage sample together with the stage-1 fit that produced its weights.
#[derive(Debug, Clone)]
pub struct TwoStageOutcome {
    pub log: SampleLog,
    /// Chains fitted to stage 1; empty when there is no second stage.
    pub stage1_chains: Vec<ChainOutput>,
}

/// Split `m` into stage sizes with `m1 = round(m * fraction)`, ties to even.
pub fn stage_sizes(m: usize, fraction: f64) -> Result<(usize, usize)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("stage-1 fraction must lie in (0, 1], got {fraction}"));
    }
    let raw = m as f64 * fraction;
    let floor = raw.floor();
    let frac = raw - floor;
    let m1 = if (frac - 0.5).abs() < 1e-9 {
        if (floor as u64).is_multiple_of(2) { floor } else { floor + 1.0 }
    } else {
        raw.round()
    } as usize;
    if m1 == 0 {
        return domain(format!("stage-1 size rounds to zero for m = {m} and fraction {fraction}"));
    }
    Ok((m1, m - m1))
}

/// Draw `m1` networks with constant weights, fit, then draw `m2` more with
/// the fitted weights.
pub fn two_stage_sample(
    population: &PopulationGrid,
    m1: usize,
    m2: usize,
    mode: SamplingMode,
    mcmc: &McmcConfig,
    seed: u64,
) -> Result<TwoStageOutcome> {
    if m1 == 0 {
        return domain("stage 1 needs at least one draw");
    }
    let cells = population.grid.cells();
    let constant = vec![1.0; cells];
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Stage1));

    let mut retries = 0;
    let survey = loop {
        let mut survey = Survey::new(population, mode);
        survey.run_stage(&constant, 1, m1, &mut rng)?;
        if survey.draws.iter().any(|d| d.is_nonempty()) {
            break survey;
        }
        retries += 1;
        if retries >= STAGE1_RETRY_BUDGET {
            return Err(AcsError::StageOneExhausted { retries });
        }
    };
    let mut log = SampleLog {
        grid: population.grid,
        mode,
        m1,
        m2: 0,
        stage_weights: vec![StageWeights::Constant(1.0)],
        draws: survey.draws.clone(),
        stage1_retries: retries,
    };
    if m2 == 0 {
        return Ok(TwoStageOutcome { log, stage1_chains: Vec::new() });
    }

    let chains = run_chains(&log, &population.covariates, mcmc, stream_seed(seed, Stream::Stage1Fit))?;
    let eta = pooled_eta_mean(&chains);
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(AcsError::Chain("stage-1 fit produced a non-finite posterior mean".into()));
    }
    let known = log.observed().known;
    let omega: Vec<f64> = (0..cells)
        .map(|c| if known[c] { 0.0 } else { eta[c].max(OMEGA_FLOOR) })
        .collect();

    let mut survey = survey;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Stage2));
    survey.run_stage(&omega, 2, m2, &mut rng)?;
    log.m2 = m2;
    log.stage_weights.push(StageWeights::PerCell(omega));
    log.draws = survey.draws;
    Ok(TwoStageOutcome { log, stage1_chains: chains })
}
