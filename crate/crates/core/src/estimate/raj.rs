//! Raj's draw-by-draw estimator for networks selected with probability
//! proportional to size, without replacement.
//!
//! Draw `j` contributes `d_j = sum_{k<j} t_k + t_j / p_j`, where `t_j` is the
//! drawn network's total and `p_j` its selection probability given the
//! earlier draws. Each `d_j` is unbiased for the total.

use serde::{Deserialize, Serialize};

use crate::error::{AcsError, Result};
use crate::survey::{DrawOutcome, SampleLog, SamplingMode, StageWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RajEstimate {
    pub estimate: f64,
    /// Unbiased variance estimate; undefined for a single draw.
    pub variance: Option<f64>,
    /// Normal-approximation 95% interval.
    pub ci: Option<(f64, f64)>,
}

/// 97.5% standard normal quantile.
const Z975: f64 = 1.959_963_984_540_054;

pub fn raj_estimator(log: &SampleLog) -> Result<RajEstimate> {
    if log.mode != SamplingMode::Network {
        return Err(AcsError::DesignMismatch("border cells are withdrawn in cluster mode".into()));
    }
    if log.m2 > 0 || log.stage_weights.len() != 1 || !matches!(log.stage_weights[0], StageWeights::Constant(_)) {
        return Err(AcsError::DesignMismatch("the estimator needs a single stage with constant weights".into()));
    }
    if log.draws.is_empty() {
        return Err(AcsError::Domain("empty sample".into()));
    }
    let mut remaining = log.grid.cells() as f64;
    let mut before = 0.0;
    let mut d = Vec::with_capacity(log.draws.len());
    for draw in &log.draws {
        let (size, total) = match &draw.outcome {
            DrawOutcome::Empty => (1.0, 0.0),
            DrawOutcome::Network { members, counts, .. } => (members.len() as f64, counts.iter().sum::<u64>() as f64),
        };
        d.push(before + total * remaining / size);
        before += total;
        remaining -= draw.removed_cells.len() as f64;
    }
    let m = d.len() as f64;
    let estimate = d.iter().sum::<f64>() / m;
    let variance = (d.len() > 1).then(|| d.iter().map(|v| (v - estimate).powi(2)).sum::<f64>() / (m * (m - 1.0)));
    let ci = variance.map(|v| (estimate - Z975 * v.sqrt(), estimate + Z975 * v.sqrt()));
    Ok(RajEstimate { estimate, variance, ci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariate::CovariateField;
    use crate::grid::GridSpec;
    use crate::population::PopulationGrid;
    use crate::survey::{acs_draw, WeightField};

    #[test]
    fn single_network_single_draw() {
        let g = GridSpec::new(4, 4).unwrap();
        let mut counts = vec![0; 16];
        counts[5] = 3;
        counts[6] = 5;
        let pop = PopulationGrid::new(g, CovariateField::intercept_only(16), counts, None).unwrap();
        let mut w = vec![0.0; 16];
        w[5] = 1.0;
        let mut log = acs_draw(&pop, &WeightField { values: w, stage: 1 }, 1, SamplingMode::Network, 0).unwrap();
        log.stage_weights = vec![StageWeights::Constant(1.0)];
        let r = raj_estimator(&log).unwrap();
        assert!((r.estimate - 16.0 * 8.0 / 2.0).abs() < 1e-12);
        assert_eq!(r.variance, None);
    }

    #[test]
    fn cluster_mode_is_a_design_mismatch() {
        let g = GridSpec::new(2, 2).unwrap();
        let pop = PopulationGrid::new(g, CovariateField::intercept_only(4), vec![1, 0, 0, 0], None).unwrap();
        let log = acs_draw(&pop, &WeightField::constant(4, 1.0), 2, SamplingMode::Cluster, 0).unwrap();
        assert!(matches!(raj_estimator(&log), Err(AcsError::DesignMismatch(_))));
    }
}
