//! Probability of the observed draw sequence under a hypothesized population.
//!
//! Each draw contributes the weight of the still-unselected networks of the
//! drawn kind divided by the weight still in the frame. The kind of a
//! nonempty draw is its network size; empty draws form their own kind. The
//! denominators depend only on the log, so they are computed once. The
//! numerators split into an observed part, also fixed, and the weight of the
//! hypothesized out-of-sample networks.

use crate::error::{domain, Result};
use crate::grid::Cell;

use super::{DrawOutcome, SampleLog};

#[derive(Debug, Clone)]
struct DrawTerm {
    stage: usize,
    /// `None` for an empty draw.
    size: Option<usize>,
    /// Observed numerator: weight of observed networks of this size still
    /// unselected, or for empty draws all remaining weight outside observed
    /// unselected networks.
    observed: f64,
    ln_den: f64,
}

/// Precomputed pieces of the selection probability for one log.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    weights: Vec<Vec<f64>>,
    terms: Vec<DrawTerm>,
    known: Vec<bool>,
}

impl SelectionContext {
    pub fn new(log: &SampleLog) -> Result<Self> {
        let cells = log.grid.cells();
        let weights = log.expanded_weights();
        if weights.is_empty() || weights.iter().any(|w| w.len() != cells) {
            return domain("log weights do not match grid");
        }
        let obs = log.observed();
        let stage_of = |d: &super::Draw| usize::from(d.stage.max(1)) - 1;
        if log.draws.iter().any(|d| stage_of(d) >= weights.len()) {
            return domain("draw refers to a stage without weights");
        }

        let mut removed = vec![false; cells];
        let mut terms = Vec::with_capacity(log.draws.len());
        for (j, d) in log.draws.iter().enumerate() {
            let w = &weights[stage_of(d)];
            let den: f64 = (0..cells).filter(|&c| !removed[c]).map(|c| w[c]).sum();
            // observed nonempty networks not yet selected: drawn at index >= j
            let pending = log.draws[j..].iter().filter_map(|e| match &e.outcome {
                DrawOutcome::Network { members, .. } => Some(members),
                DrawOutcome::Empty => None,
            });
            let (size, observed) = match &d.outcome {
                DrawOutcome::Network { members, .. } => {
                    let y = members.len();
                    let mass = pending
                        .filter(|m| m.len() == y)
                        .map(|m| m.iter().map(|&c| w[c]).sum::<f64>())
                        .sum();
                    (Some(y), mass)
                }
                DrawOutcome::Empty => {
                    let occupied: f64 = pending.flatten().map(|&c| w[c]).sum();
                    (None, den - occupied)
                }
            };
            terms.push(DrawTerm { stage: stage_of(d), size, observed, ln_den: den.ln() });
            for &c in &d.removed_cells {
                removed[c] = true;
            }
        }
        Ok(Self { weights, terms, known: obs.known })
    }

    /// Cells that no hypothesized network may occupy.
    pub fn known(&self) -> &[bool] {
        &self.known
    }

    /// Log selection probability given the out-of-sample network cell sets.
    ///
    /// Returns `-inf` when a hypothesized cell is already known.
    pub fn log_prob(&self, alloc: &[Vec<Cell>]) -> f64 {
        if alloc.iter().flatten().any(|&c| c >= self.known.len() || self.known[c]) {
            return f64::NEG_INFINITY;
        }
        let masses: Vec<Vec<f64>> = self
            .weights
            .iter()
            .map(|w| alloc.iter().map(|net| net.iter().map(|&c| w[c]).sum()).collect())
            .collect();
        let mut total = 0.0;
        for t in &self.terms {
            let mass = &masses[t.stage];
            let num = match t.size {
                Some(y) => {
                    t.observed
                        + alloc
                            .iter()
                            .zip(mass)
                            .filter(|(net, _)| net.len() == y)
                            .map(|(_, m)| m)
                            .sum::<f64>()
                }
                None => t.observed - mass.iter().sum::<f64>(),
            };
            // guard against cancellation leaving a tiny negative remainder
            if !(num > 1e-300) {
                return f64::NEG_INFINITY;
            }
            total += num.ln() - t.ln_den;
        }
        total
    }
}

/// Log selection probability of `log` when the unobserved networks occupy `alloc`.
pub fn selection_log_prob(log: &SampleLog, alloc: &[Vec<Cell>]) -> Result<f64> {
    Ok(SelectionContext::new(log)?.log_prob(alloc))
}
