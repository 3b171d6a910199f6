//! Metropolis-within-Gibbs sampler for the disaggregated model.
//!
//! One sweep updates the count coefficients, then `alpha`, then `beta`,
//! then (in occupancy mode) the occupancy coefficients, and finally the
//! hidden networks jointly with their counts.

mod blocks;
mod io;
mod latent;

pub use blocks::{
    alpha_ln_density, beta_ln_density, occupancy_probability, update_alpha, update_beta, update_rho, update_theta,
    RandomWalk, RhoTarget, ThetaTarget,
};
pub use io::{read_draws_csv, write_draws_csv, DrawColumns};
pub use latent::{LatentModel, LatentState, LatentTally};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::CovariateField;
use crate::dist::{PriorConfig, TruncPoisson};
use crate::error::{AcsError, Result};
use crate::population::{intensities, ModelParams};
use crate::seed::mix_seed;
use crate::survey::SampleLog;

use blocks::Adapter;

/// Proposal covariance shape for the coefficient random walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalCov {
    #[default]
    Identity,
    /// `(V'V)^-1` over the observed nonempty cells.
    InverseGram,
}

/// Where allocation weights for hidden networks come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocWeightSource {
    /// `exp(v_c' theta)`.
    #[default]
    Lambda,
    /// Occupancy probabilities from the logistic model.
    Occupancy,
}

/// Which blocks are updated; switching one off freezes it at its start value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Blocks {
    pub theta: bool,
    pub alpha: bool,
    pub beta: bool,
    pub latent: bool,
    pub rho: bool,
}

impl Default for Blocks {
    fn default() -> Self {
        Self { theta: true, alpha: true, beta: true, latent: true, rho: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    /// Initial random-walk variance for `theta`.
    pub prop_scale_theta: f64,
    /// Initial random-walk variance for `rho`.
    pub prop_scale_rho: f64,
    pub theta_proposal_cov: ProposalCov,
    /// Half-width of the proposal window for the number of nonempty cells.
    pub x_window: usize,
    pub alloc_weight_source: AllocWeightSource,
    /// Restarts allowed per hidden network before a proposal is rejected.
    pub alloc_retry_budget: usize,
    /// Tune proposal scales during burn-in.
    pub adapt: bool,
    pub priors: PriorConfig,
    pub blocks: Blocks,
    /// Fixed starting values shared by all chains.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<ModelParams>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 500,
            thin: 5,
            n_chains: 2,
            prop_scale_theta: 0.01,
            prop_scale_rho: 0.5,
            theta_proposal_cov: ProposalCov::Identity,
            x_window: 5,
            alloc_weight_source: AllocWeightSource::Lambda,
            alloc_retry_budget: 100,
            adapt: true,
            priors: PriorConfig::default(),
            blocks: Blocks::default(),
            init: None,
        }
    }
}

impl McmcConfig {
    /// Long-run settings: 40,100 iterations, burn-in 100, thinning 20, two chains.
    pub fn paper_scale() -> Self {
        Self { iterations: 40_100, burn_in: 100, thin: 20, n_chains: 2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AcsError::Config(msg));
        if self.iterations <= self.burn_in {
            return bad(format!("iterations ({}) must exceed burn_in ({})", self.iterations, self.burn_in));
        }
        if self.thin == 0 || self.n_chains == 0 || self.x_window == 0 || self.alloc_retry_budget == 0 {
            return bad("thin, n_chains, x_window and alloc_retry_budget must be positive".into());
        }
        if !(self.prop_scale_theta > 0.0 && self.prop_scale_rho > 0.0) {
            return bad("proposal scales must be positive".into());
        }
        self.priors.validate().map_err(|e| AcsError::Config(e.to_string()))
    }

    /// Retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One retained iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraw {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    pub x: usize,
    pub p: usize,
    pub total: u64,
}

/// Acceptance rates over the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub latent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub latent_tally: LatentTally,
    /// Post-adaptation random-walk variance for `theta`.
    pub theta_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain: usize,
    pub seed: u64,
    pub draws: Vec<ChainDraw>,
    pub acceptance: AcceptanceRates,
    /// Posterior mean of each cell's count over retained draws.
    pub eta_mean: Vec<f64>,
    pub final_latent: LatentState,
    /// Wall-clock seconds; excluded from anything compared for determinism.
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl PartialEq for ChainOutput {
    /// Timing is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.chain == other.chain
            && self.seed == other.seed
            && self.draws == other.draws
            && self.acceptance == other.acceptance
            && self.eta_mean == other.eta_mean
            && self.final_latent == other.final_latent
    }
}

impl ChainOutput {
    pub fn totals(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.total as f64).collect()
    }
}

/// Per-cell posterior mean pooled over chains.
pub fn pooled_eta_mean(chains: &[ChainOutput]) -> Vec<f64> {
    let n: usize = chains.iter().map(|c| c.draws.len()).sum();
    let Some(first) = chains.first() else { return Vec::new() };
    let mut out = vec![0.0; first.eta_mean.len()];
    for ch in chains {
        let w = ch.draws.len() as f64 / n as f64;
        for (o, v) in out.iter_mut().zip(&ch.eta_mean) {
            *o += w * v;
        }
    }
    out
}

/// Coarse likelihood search for starting coefficients.
///
/// The intercept is scanned first with slopes at zero, then each slope in turn.
pub fn initial_theta(covariates: &CovariateField, cells: &[(usize, u64)], sigma2: f64) -> Vec<f64> {
    let target = ThetaTarget { covariates, cells: cells.to_vec(), sigma2 };
    let mut theta = vec![0.0; covariates.k() + 1];
    let scan = |theta: &mut Vec<f64>, j: usize, lo: f64, hi: f64| {
        let steps = ((hi - lo) / 0.05).round() as usize;
        let mut best = (f64::NEG_INFINITY, theta[j]);
        for i in 0..=steps {
            theta[j] = lo + i as f64 * 0.05;
            let lp = target.ln_density(theta);
            if lp > best.0 {
                best = (lp, theta[j]);
            }
        }
        theta[j] = best.1;
    };
    scan(&mut theta, 0, -5.0, 10.0);
    for j in 1..theta.len() {
        scan(&mut theta, j, -3.0, 3.0);
    }
    theta
}

fn initial_rho(covariates: &CovariateField, cells: &[(usize, bool)]) -> Vec<f64> {
    let occupied = cells.iter().filter(|c| c.1).count() as f64;
    let frac = ((occupied + 0.5) / (cells.len() as f64 + 1.0)).clamp(0.01, 0.99);
    let mut rho = vec![0.0; covariates.k() + 1];
    rho[0] = (frac / (1.0 - frac)).ln();
    rho
}

/// Run chain number `chain` on a sample.
pub fn run_chain_indexed(
    log: &SampleLog,
    covariates: &CovariateField,
    cfg: &McmcConfig,
    seed: u64,
    chain: usize,
) -> Result<ChainOutput> {
    cfg.validate()?;
    if covariates.cells() != log.grid.cells() {
        return Err(AcsError::Domain("covariate field does not match the sample grid".into()));
    }
    let started = Instant::now();
    let chain_seed = mix_seed(seed, chain as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);
    let model = LatentModel::new(log, cfg.x_window, cfg.alloc_retry_budget)?;
    let obs = &model.obs;
    if obs.x_s == 0 {
        return Err(AcsError::Domain("the sample holds no nonempty network".into()));
    }
    let m = log.grid.cells();
    let k = covariates.k();
    let priors = &cfg.priors;
    let occupancy = cfg.alloc_weight_source == AllocWeightSource::Occupancy;

    let theta_target = ThetaTarget { covariates, cells: obs.nonempty_cells.clone(), sigma2: priors.sigma2_theta };
    let rho_target = RhoTarget { covariates, cells: obs.occupancy(), sigma2: priors.sigma2_rho };
    let mut theta_walk = match cfg.theta_proposal_cov {
        ProposalCov::Identity => RandomWalk::identity(k + 1, cfg.prop_scale_theta),
        ProposalCov::InverseGram => {
            RandomWalk::inverse_gram(covariates, obs.nonempty_cells.iter().map(|c| c.0), cfg.prop_scale_theta)
        }
    };
    let mut rho_walk = RandomWalk::inverse_gram(covariates, rho_target.cells.iter().map(|c| c.0), cfg.prop_scale_rho);

    let (mut theta, mut alpha, mut beta, init_rho) = match &cfg.init {
        Some(p) => {
            p.validate(k)?;
            (p.theta.clone(), p.alpha, p.beta, p.rho.clone())
        }
        None => {
            let mut theta = initial_theta(covariates, &obs.nonempty_cells, priors.sigma2_theta);
            for t in &mut theta {
                *t += chain as f64;
            }
            let alpha = (obs.x_s as f64 / m as f64).clamp(0.01, 0.5);
            let beta = (obs.p_s as f64 / obs.x_s.max(1) as f64).clamp(0.01, 0.5);
            (theta, alpha, beta, None)
        }
    };
    let mut rho = occupancy.then(|| init_rho.unwrap_or_else(|| initial_rho(covariates, &rho_target.cells)));
    let mut latent = LatentState::empty();

    let mut lambda = intensities(&theta, covariates);
    let mut nu: Vec<f64> = match &rho {
        Some(r) => (0..m).map(|c| occupancy_probability(covariates, c, r)).collect(),
        None => Vec::new(),
    };

    let mut tally = LatentTally::default();
    let (mut acc_theta, mut acc_alpha, mut acc_beta, mut acc_rho) = (0usize, 0usize, 0usize, 0usize);
    let mut adapt_theta = Adapter::new();
    let mut adapt_rho = Adapter::new();
    let mut eta_sum = vec![0.0; m];
    let mut draws = Vec::with_capacity(cfg.retained());
    let observed_total = obs.total;

    for iter in 0..cfg.iterations {
        if cfg.blocks.theta {
            let moved = update_theta(&mut theta, &theta_target, &theta_walk, &mut rng);
            if moved {
                acc_theta += 1;
                lambda = intensities(&theta, covariates);
            }
            adapt_theta.record(moved);
        }
        let x = obs.x_s + latent.x_bar;
        let p = obs.p_s + latent.p_bar;
        if cfg.blocks.alpha {
            let (a, moved) = update_alpha(alpha, x, m, priors, &mut rng);
            alpha = a;
            acc_alpha += usize::from(moved);
        }
        if cfg.blocks.beta {
            let (b, moved) = update_beta(beta, p, x, priors, &mut rng);
            beta = b;
            acc_beta += usize::from(moved);
        }
        if let (Some(r), true) = (rho.as_mut(), cfg.blocks.rho) {
            let moved = update_rho(r, &rho_target, &rho_walk, &mut rng);
            if moved {
                acc_rho += 1;
                nu = (0..m).map(|c| occupancy_probability(covariates, c, r)).collect();
            }
            adapt_rho.record(moved);
        }
        if cfg.blocks.latent {
            let weights = if occupancy { &nu } else { &lambda };
            model.update(&mut latent, alpha, beta, weights, &lambda, &mut tally, &mut rng);
            if cfg!(debug_assertions) {
                if let Err(msg) = latent.check(&obs.known, &log.grid) {
                    return Err(AcsError::Chain(format!("latent invariant broken at iteration {iter}: {msg}")));
                }
            }
        }
        if cfg.adapt && iter < cfg.burn_in && (iter + 1) % Adapter::WINDOW == 0 {
            adapt_theta.tune(&mut theta_walk.scale);
            adapt_rho.tune(&mut rho_walk.scale);
        }

        if iter >= cfg.burn_in && (iter - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            let ln_joint = theta_target.ln_density(&theta)
                + model.ln_target(&latent, alpha, beta)
                + alpha_ln_density(alpha, obs.x_s + latent.x_bar, m, priors)
                + beta_ln_density(beta, obs.p_s + latent.p_bar, obs.x_s + latent.x_bar, priors);
            let ln_counts: f64 = latent
                .alloc
                .iter()
                .flatten()
                .zip(latent.eta_bar.iter().flatten())
                .map(|(&c, &k)| TruncPoisson::new(lambda[c]).map(|d| d.ln_pmf(k)).unwrap_or(f64::NEG_INFINITY))
                .sum();
            if !(ln_joint + ln_counts).is_finite() {
                return Err(AcsError::Chain(format!(
                    "non-finite joint density at iteration {iter}: theta={theta:?} alpha={alpha} beta={beta} latent={latent:?}"
                )));
            }
            for (&c, &k) in latent.alloc.iter().flatten().zip(latent.eta_bar.iter().flatten()) {
                eta_sum[c] += k as f64;
            }
            draws.push(ChainDraw {
                iter: iter + 1,
                theta: theta.clone(),
                alpha,
                beta,
                rho: rho.clone(),
                x: obs.x_s + latent.x_bar,
                p: obs.p_s + latent.p_bar,
                total: observed_total + latent.total(),
            });
        }
    }

    let n = draws.len().max(1) as f64;
    let mut eta_mean: Vec<f64> = eta_sum.iter().map(|s| s / n).collect();
    for &(c, k) in &obs.nonempty_cells {
        eta_mean[c] = k as f64;
    }
    let iters = cfg.iterations as f64;
    let rate = |a: usize, on: bool| if on { a as f64 / iters } else { 0.0 };
    let acceptance = AcceptanceRates {
        theta: rate(acc_theta, cfg.blocks.theta),
        alpha: rate(acc_alpha, cfg.blocks.alpha),
        beta: rate(acc_beta, cfg.blocks.beta),
        latent: if tally.proposed == 0 { 0.0 } else { tally.accepted as f64 / tally.proposed as f64 },
        rho: rho.as_ref().map(|_| rate(acc_rho, cfg.blocks.rho)),
        latent_tally: tally,
        theta_scale: theta_walk.scale,
    };
    Ok(ChainOutput {
        chain,
        seed: chain_seed,
        draws,
        acceptance,
        eta_mean,
        final_latent: latent,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Run the first chain.
pub fn run_chain(log: &SampleLog, covariates: &CovariateField, cfg: &McmcConfig, seed: u64) -> Result<ChainOutput> {
    run_chain_indexed(log, covariates, cfg, seed, 0)
}

/// Run `cfg.n_chains` chains in parallel; output is ordered by chain index.
pub fn run_chains(
    log: &SampleLog,
    covariates: &CovariateField,
    cfg: &McmcConfig,
    seed: u64,
) -> Result<Vec<ChainOutput>> {
    (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| run_chain_indexed(log, covariates, cfg, seed, chain))
        .collect()
}
