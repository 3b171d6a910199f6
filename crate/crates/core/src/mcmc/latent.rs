//! Out-of-sample networks and their joint update.
//!
//! A move proposes a new total of nonempty cells within a window around the
//! current one, then draws the number of hidden networks, their sizes, their
//! placement and their counts from the model itself. Because the proposal
//! reuses the model laws, placement and count terms cancel in the ratio and
//! only the selection probability and the structure terms that involve the
//! observed part remain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::allocate_networks;
use crate::dist::{ln_fact, ShiftedMultinomial, TruncBinomial, TruncPoisson};
use crate::grid::{is_connected, Cell, GridSpec};
use crate::survey::{ObservedSample, SampleLog, SelectionContext};

use super::blocks::accept;
use crate::error::Result;

/// Hidden part of the population.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatentState {
    pub x_bar: usize,
    pub p_bar: usize,
    /// Network sizes, descending, aligned with `alloc`.
    pub y_bar: Vec<usize>,
    /// Cells of each hidden network, ascending within a network.
    pub alloc: Vec<Vec<Cell>>,
    /// Counts aligned with `alloc`.
    pub eta_bar: Vec<Vec<u64>>,
}

impl LatentState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.eta_bar.iter().flatten().sum()
    }

    /// Check every structural invariant against the known cells.
    pub fn check(&self, known: &[bool], grid: &GridSpec) -> std::result::Result<(), String> {
        if self.y_bar.iter().sum::<usize>() != self.x_bar {
            return Err(format!("sizes {:?} do not sum to {}", self.y_bar, self.x_bar));
        }
        if self.y_bar.len() != self.p_bar || self.alloc.len() != self.p_bar || self.eta_bar.len() != self.p_bar {
            return Err("network count mismatch".into());
        }
        let mut seen = vec![false; grid.cells()];
        for ((net, &y), eta) in self.alloc.iter().zip(&self.y_bar).zip(&self.eta_bar) {
            if net.len() != y || eta.len() != y {
                return Err(format!("network {net:?} does not have size {y}"));
            }
            if !is_connected(net, grid) {
                return Err(format!("network {net:?} is not connected"));
            }
            if eta.contains(&0) {
                return Err("zero count on an allocated cell".into());
            }
            for &c in net {
                if known[c] || seen[c] {
                    return Err(format!("cell {c} is known or allocated twice"));
                }
                seen[c] = true;
            }
        }
        Ok(())
    }
}

/// Fixed ingredients of the latent update for one sample.
#[derive(Debug, Clone)]
pub struct LatentModel {
    pub grid: GridSpec,
    pub obs: ObservedSample,
    pub selection: SelectionContext,
    pub x_window: usize,
    pub retry_budget: usize,
    ln_fact_obs_excess: f64,
}

/// Counts of what happened in latent moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentTally {
    pub proposed: usize,
    pub accepted: usize,
    pub out_of_range: usize,
    pub allocation_failures: usize,
}

impl LatentModel {
    pub fn new(log: &SampleLog, x_window: usize, retry_budget: usize) -> Result<Self> {
        let obs = log.observed();
        let selection = SelectionContext::new(log)?;
        let ln_fact_obs_excess = obs.y_s.iter().map(|&y| ln_fact((y - 1) as u64)).sum();
        Ok(Self { grid: log.grid, obs, selection, x_window, retry_budget, ln_fact_obs_excess })
    }

    /// Log of the terms of the joint density that involve the hidden networks,
    /// excluding placement and counts.
    ///
    /// Hidden sizes are an unordered multiset, so both this and
    /// [`Self::ln_proposal`] omit the number of orderings of `y_bar`; the
    /// factor is the same on both sides of the ratio and cancels.
    pub fn ln_target(&self, latent: &LatentState, alpha: f64, beta: f64) -> f64 {
        let m = self.grid.cells();
        let x = self.obs.x_s + latent.x_bar;
        let p = self.obs.p_s + latent.p_bar;
        if x == 0 || x > m || p == 0 || p > x {
            return f64::NEG_INFINITY;
        }
        let ln_sel = self.selection.log_prob(&latent.alloc);
        if ln_sel == f64::NEG_INFINITY {
            return ln_sel;
        }
        let excess = (x - p) as u64;
        let ln_sizes = ln_fact(excess)
            - excess as f64 * (p as f64).ln()
            - self.ln_fact_obs_excess
            - latent.y_bar.iter().map(|&y| ln_fact((y - 1) as u64)).sum::<f64>();
        let (Ok(law_p), Ok(law_x)) = (TruncBinomial::new(x as u64, beta), TruncBinomial::new(m as u64, alpha)) else {
            return f64::NEG_INFINITY;
        };
        ln_sel + ln_sizes + law_p.ln_pmf(p as u64) + law_x.ln_pmf(x as u64)
    }

    /// Log proposal density of the hidden sizes, excluding the window factor,
    /// placement and counts.
    pub fn ln_proposal(latent: &LatentState, beta: f64) -> f64 {
        if latent.x_bar == 0 {
            return 0.0;
        }
        let Ok(law_p) = TruncBinomial::new(latent.x_bar as u64, beta) else {
            return f64::NEG_INFINITY;
        };
        let sizes = ShiftedMultinomial::new((latent.x_bar - latent.p_bar) as u64, latent.p_bar)
            .map(|law| law.ln_pmf(&latent.y_bar))
            .unwrap_or(f64::NEG_INFINITY);
        law_p.ln_pmf(latent.p_bar as u64) + sizes
    }

    /// Draw a fresh hidden part with `x_bar` cells, or `None` if placement failed.
    pub fn propose<R: Rng + ?Sized>(
        &self,
        x_bar: usize,
        beta: f64,
        alloc_weights: &[f64],
        lambda: &[f64],
        rng: &mut R,
    ) -> Option<LatentState> {
        if x_bar == 0 {
            return Some(LatentState::empty());
        }
        let p_bar = TruncBinomial::new(x_bar as u64, beta).ok()?.sample(rng) as usize;
        let y = ShiftedMultinomial::new((x_bar - p_bar) as u64, p_bar).ok()?.sample(rng);
        let alloc = allocate_networks(&y, alloc_weights, &self.obs.known, &self.grid, self.retry_budget, rng).ok()?;
        let mut eta_bar = Vec::with_capacity(alloc.len());
        for net in &alloc {
            let mut counts = Vec::with_capacity(net.len());
            for &c in net {
                counts.push(TruncPoisson::new(lambda[c]).ok()?.sample(rng));
            }
            eta_bar.push(counts);
        }
        let y_bar = alloc.iter().map(Vec::len).collect();
        Some(LatentState { x_bar, p_bar, y_bar, alloc, eta_bar })
    }

    /// One joint move of the hidden part.
    #[allow(clippy::too_many_arguments)]
    pub fn update<R: Rng + ?Sized>(
        &self,
        latent: &mut LatentState,
        alpha: f64,
        beta: f64,
        alloc_weights: &[f64],
        lambda: &[f64],
        tally: &mut LatentTally,
        rng: &mut R,
    ) -> bool {
        tally.proposed += 1;
        let w = self.x_window as i64;
        let mut step = rng.random_range(1..=w);
        if rng.random::<bool>() {
            step = -step;
        }
        let x_new = (self.obs.x_s + latent.x_bar) as i64 + step;
        if x_new < self.obs.x_s as i64 || x_new >= self.grid.cells() as i64 {
            tally.out_of_range += 1;
            return false;
        }
        let x_bar = x_new as usize - self.obs.x_s;
        let Some(candidate) = self.propose(x_bar, beta, alloc_weights, lambda, rng) else {
            tally.allocation_failures += 1;
            return false;
        };
        let log_ratio = (self.ln_target(&candidate, alpha, beta) - Self::ln_proposal(&candidate, beta))
            - (self.ln_target(latent, alpha, beta) - Self::ln_proposal(latent, beta));
        if accept(log_ratio, rng) {
            *latent = candidate;
            tally.accepted += 1;
            true
        } else {
            false
        }
    }
}
