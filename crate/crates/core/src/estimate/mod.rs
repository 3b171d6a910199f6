//! Posterior summaries, the Raj baseline, Geweke diagnostics and replication
//! metrics.

mod geweke;
mod metrics;
mod raj;

pub use geweke::{geweke_z, geweke_z_with, SpectralMethod, GEWEKE_FRAC_A, GEWEKE_FRAC_B};
pub use metrics::{summarize_metrics, MetricsSummary};
pub use raj::{raj_estimator, RajEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{AcsError, Result};
use crate::mcmc::{AcceptanceRates, ChainOutput};

/// Point and equal-tailed 95% interval summary of a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_draws: usize,
}

impl PosteriorSummary {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Linear-interpolation quantile of sorted data (`(n - 1) q` positioning).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarize a set of draws.
pub fn summarize(values: &[f64]) -> Result<PosteriorSummary> {
    if values.is_empty() {
        return Err(AcsError::Domain("cannot summarize an empty set of draws".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AcsError::Numerical("non-finite draw".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PosteriorSummary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile(&sorted, 0.5),
        ci_low: quantile(&sorted, 0.025),
        ci_high: quantile(&sorted, 0.975),
        n_draws: values.len(),
    })
}

/// Summary of the population total pooled over chains.
pub fn total_posterior(chains: &[ChainOutput]) -> Result<PosteriorSummary> {
    let draws: Vec<f64> = chains.iter().flat_map(ChainOutput::totals).collect();
    summarize(&draws)
}

fn pooled(chains: &[ChainOutput], f: impl Fn(&crate::mcmc::ChainDraw) -> f64) -> Vec<f64> {
    chains.iter().flat_map(|c| c.draws.iter().map(&f)).collect()
}

/// Everything reported about one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub total: PosteriorSummary,
    pub alpha: PosteriorSummary,
    pub beta: PosteriorSummary,
    pub theta: Vec<PosteriorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<PosteriorSummary>>,
    pub x: PosteriorSummary,
    pub p: PosteriorSummary,
    pub acceptance: Vec<AcceptanceRates>,
    /// Geweke z of the total per chain; `None` where undefined.
    pub geweke_total: Vec<Option<f64>>,
    pub eta_mean: Vec<f64>,
}

pub fn fit_summary(chains: &[ChainOutput]) -> Result<FitSummary> {
    let first = chains
        .iter()
        .find_map(|c| c.draws.first())
        .ok_or_else(|| AcsError::Domain("no retained draws".into()))?;
    let theta = (0..first.theta.len())
        .map(|j| summarize(&pooled(chains, |d| d.theta[j])))
        .collect::<Result<Vec<_>>>()?;
    let rho = match &first.rho {
        Some(r) => Some(
            (0..r.len())
                .map(|j| summarize(&pooled(chains, |d| d.rho.as_ref().map_or(f64::NAN, |r| r[j]))))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(FitSummary {
        total: total_posterior(chains)?,
        alpha: summarize(&pooled(chains, |d| d.alpha))?,
        beta: summarize(&pooled(chains, |d| d.beta))?,
        theta,
        rho,
        x: summarize(&pooled(chains, |d| d.x as f64))?,
        p: summarize(&pooled(chains, |d| d.p as f64))?,
        acceptance: chains.iter().map(|c| c.acceptance.clone()).collect(),
        geweke_total: chains
            .iter()
            .map(|c| geweke_z(&c.totals(), GEWEKE_FRAC_A, GEWEKE_FRAC_B).ok())
            .collect(),
        eta_mean: crate::mcmc::pooled_eta_mean(chains),
    })
}
