//! Relative error metrics across replications.

use serde::{Deserialize, Serialize};

use super::PosteriorSummary;
use crate::error::{AcsError, Result};

/// Relative errors of posterior-mean estimates against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub rrmse: f64,
    pub rae: f64,
    pub rb: f64,
    pub rw: f64,
    /// Percentage of intervals containing the truth.
    pub coverage: f64,
    pub replications: usize,
}

impl MetricsSummary {
    pub const CSV_HEADER: [&'static str; 6] = ["rrmse", "rae", "rb", "rw", "coverage", "replications"];

    pub fn csv_fields(&self) -> [String; 6] {
        [
            format!("{:.6}", self.rrmse),
            format!("{:.6}", self.rae),
            format!("{:.6}", self.rb),
            format!("{:.6}", self.rw),
            format!("{:.2}", self.coverage),
            self.replications.to_string(),
        ]
    }
}

/// Aggregate `(summary, truth)` pairs.
pub fn summarize_metrics(estimates: &[(PosteriorSummary, f64)]) -> Result<MetricsSummary> {
    if estimates.is_empty() {
        return Err(AcsError::Domain("no replications to summarize".into()));
    }
    if estimates.iter().any(|(_, t)| !(*t > 0.0)) {
        return Err(AcsError::Domain("true value must be positive".into()));
    }
    let n = estimates.len() as f64;
    let rel: Vec<f64> = estimates.iter().map(|(s, t)| (s.mean - t) / t).collect();
    Ok(MetricsSummary {
        rrmse: (rel.iter().map(|r| r * r).sum::<f64>() / n).sqrt(),
        rae: rel.iter().map(|r| r.abs()).sum::<f64>() / n,
        rb: rel.iter().sum::<f64>() / n,
        rw: estimates.iter().map(|(s, t)| s.width() / t).sum::<f64>() / n,
        coverage: 100.0 * estimates.iter().filter(|(s, t)| s.covers(*t)).count() as f64 / n,
        replications: estimates.len(),
    })
}
