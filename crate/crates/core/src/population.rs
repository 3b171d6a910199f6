//! Model parameters, populations and the generative model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::allocation::allocate_networks;
use crate::covariate::CovariateField;
use crate::dist::{ShiftedMultinomial, TruncBinomial, TruncPoisson};
use crate::error::{domain, AcsError, Result};
use crate::grid::{extract_networks, GridSpec, NetworkPartition};

/// Regression coefficients and structure parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Count-intensity coefficients, intercept first.
    pub theta: Vec<f64>,
    /// Nonempty-cell probability.
    pub alpha: f64,
    /// Network-start probability.
    pub beta: f64,
    /// Occupancy coefficients, when the occupancy extension is in use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

impl ModelParams {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.theta.len() != k + 1 {
            return domain(format!("theta has {} entries, expected {}", self.theta.len(), k + 1));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return domain("theta must be finite");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(self.beta > 0.0 && self.beta < 1.0) {
            return domain(format!("alpha and beta must lie in (0,1), got {} and {}", self.alpha, self.beta));
        }
        if let Some(rho) = &self.rho {
            if rho.len() != k + 1 || rho.iter().any(|r| !r.is_finite()) {
                return domain("rho must be finite with k+1 entries");
            }
        }
        Ok(())
    }

    /// `lambda(c) = exp(v_c' theta)` for every cell.
    pub fn intensities(&self, covariates: &CovariateField) -> Vec<f64> {
        intensities(&self.theta, covariates)
    }
}

pub(crate) fn intensities(theta: &[f64], covariates: &CovariateField) -> Vec<f64> {
    (0..covariates.cells()).map(|c| covariates.linear(c, theta).exp()).collect()
}

/// A complete population on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationGrid {
    pub grid: GridSpec,
    pub covariates: CovariateField,
    /// `eta(c)` for every cell; zero on empty cells.
    pub counts: Vec<u64>,
    pub true_params: Option<ModelParams>,
    pub networks: NetworkPartition,
}

impl PopulationGrid {
    pub fn new(
        grid: GridSpec,
        covariates: CovariateField,
        counts: Vec<u64>,
        true_params: Option<ModelParams>,
    ) -> Result<Self> {
        if covariates.cells() != grid.cells() {
            return domain("covariate field does not match grid");
        }
        let networks = extract_networks(&counts, &grid)?;
        Ok(Self { grid, covariates, counts, true_params, networks })
    }

    /// Population total `T`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// At least one nonempty cell, as the truncated model requires.
    pub fn is_usable(&self) -> bool {
        self.networks.x >= 1
    }
}

/// Whole-allocation attempts before the network sizes are redrawn.
pub const GENERATION_ALLOCATION_RETRIES: usize = 100;
/// Size redraws before generation gives up.
pub const GENERATION_SIZE_REDRAWS: usize = 100;
const GENERATION_GROWTH_RETRIES: usize = 100;

/// Draw a population from the model, placing networks with the allocation procedure.
///
/// `alloc_weights` defaults to the intensities `exp(v_c' theta)`.
pub fn generate_population(
    grid: &GridSpec,
    covariates: &CovariateField,
    params: &ModelParams,
    alloc_weights: Option<&[f64]>,
    seed: u64,
) -> Result<PopulationGrid> {
    generate_with_sizes(grid, covariates, params, alloc_weights, seed).map(|(pop, _)| pop)
}

/// As [`generate_population`], also returning the drawn network sizes.
pub(crate) fn generate_with_sizes(
    grid: &GridSpec,
    covariates: &CovariateField,
    params: &ModelParams,
    alloc_weights: Option<&[f64]>,
    seed: u64,
) -> Result<(PopulationGrid, Vec<usize>)> {
    params.validate(covariates.k())?;
    if covariates.cells() != grid.cells() {
        return domain("covariate field does not match grid");
    }
    let m = grid.cells();
    let lambda = params.intensities(covariates);
    let weights = alloc_weights.unwrap_or(&lambda);
    if weights.len() != m || weights.iter().any(|w| !(*w >= 0.0)) || !weights.iter().any(|w| *w > 0.0) {
        return domain("allocation weights must be nonnegative with at least one positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forbidden = vec![false; m];

    let x = TruncBinomial::new(m as u64, params.alpha)?.sample(&mut rng);
    let p = TruncBinomial::new(x, params.beta)?.sample(&mut rng) as usize;
    let sizes_law = ShiftedMultinomial::new(x - p as u64, p)?;
    let mut last_failure = 0;
    for redraw in 0..GENERATION_SIZE_REDRAWS {
        let sizes = sizes_law.sample(&mut rng);
        for _ in 0..GENERATION_ALLOCATION_RETRIES {
            match allocate_networks(&sizes, weights, &forbidden, grid, GENERATION_GROWTH_RETRIES, &mut rng) {
                Ok(alloc) => {
                    let mut counts = vec![0u64; m];
                    for &c in alloc.iter().flatten() {
                        counts[c] = TruncPoisson::new(lambda[c])?.sample(&mut rng);
                    }
                    let pop = PopulationGrid::new(*grid, covariates.clone(), counts, Some(params.clone()))?;
                    return Ok((pop, sizes));
                }
                Err(f) => last_failure = f.size,
            }
        }
        log::warn!("allocation of sizes {sizes:?} failed repeatedly; redrawing sizes (attempt {redraw})");
    }
    Err(AcsError::Generation {
        size: last_failure,
        reason: format!("allocation failed after {GENERATION_SIZE_REDRAWS} size redraws"),
    })
}
