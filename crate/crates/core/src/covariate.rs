//! Per-cell covariates and Gaussian random field simulation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, AcsError, Result};
use crate::grid::GridSpec;

/// Covariate vectors `(1, v_1(c), ..., v_k(c))` for every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateField {
    k: usize,
    /// Row-major `cells x (k + 1)` with a leading intercept column.
    values: Vec<f64>,
    /// Mean subtracted from each covariate, when centered.
    centers: Vec<Option<f64>>,
}

impl CovariateField {
    /// Build from raw covariate columns (one `Vec` per covariate, each of length `cells`).
    pub fn from_columns(cells: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        if columns.iter().any(|c| c.len() != cells) {
            return domain("covariate column length does not match cell count");
        }
        let mut values = Vec::with_capacity(cells * (k + 1));
        for c in 0..cells {
            values.push(1.0);
            for col in columns {
                let v = col[c];
                if !v.is_finite() {
                    return domain(format!("non-finite covariate at cell {c}"));
                }
                values.push(v);
            }
        }
        Ok(Self { k, values, centers: vec![None; k] })
    }

    /// Intercept-only design.
    pub fn intercept_only(cells: usize) -> Self {
        Self { k: 0, values: vec![1.0; cells], centers: Vec::new() }
    }

    /// Number of covariates excluding the intercept.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> usize {
        self.values.len() / (self.k + 1)
    }

    /// `v_c` including the leading 1.
    #[inline]
    pub fn row(&self, cell: usize) -> &[f64] {
        let w = self.k + 1;
        &self.values[cell * w..(cell + 1) * w]
    }

    /// Raw values of covariate `j` (1-based, as in `v_j`).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.cells()).map(|c| self.row(c)[j]).collect()
    }

    /// `v_c' coef`.
    #[inline]
    pub fn linear(&self, cell: usize, coef: &[f64]) -> f64 {
        self.row(cell).iter().zip(coef).map(|(v, b)| v * b).sum()
    }

    pub fn centers(&self) -> &[Option<f64>] {
        &self.centers
    }

    /// Subtract each covariate's mean; the means are kept for prediction-time reuse.
    pub fn center(&mut self) {
        let cells = self.cells();
        let w = self.k + 1;
        for j in 1..w {
            if self.centers[j - 1].is_some() {
                continue;
            }
            let mean = (0..cells).map(|c| self.values[c * w + j]).sum::<f64>() / cells as f64;
            for c in 0..cells {
                self.values[c * w + j] -= mean;
            }
            self.centers[j - 1] = Some(mean);
        }
    }

    /// Apply stored centering constants to raw covariates of another grid.
    pub fn apply_centers(&mut self, centers: &[Option<f64>]) -> Result<()> {
        if centers.len() != self.k {
            return domain("centering constants do not match covariate count");
        }
        let w = self.k + 1;
        for (j, mean) in centers.iter().enumerate() {
            if let Some(mean) = mean {
                for c in 0..self.cells() {
                    self.values[c * w + j + 1] -= mean;
                }
                self.centers[j] = Some(*mean);
            }
        }
        Ok(())
    }
}

/// Covariance family of the simulated field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    SquaredExponential,
}

/// Stationary Gaussian process on cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub kernel: Kernel,
    /// In cell units.
    pub length_scale: f64,
    pub variance: f64,
    pub mean: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { kernel: Kernel::SquaredExponential, length_scale: 3.0, variance: 1.0, mean: 0.0 }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return domain(format!("length_scale must be > 0, got {}", self.length_scale));
        }
        if !(self.variance.is_finite() && self.variance >= 0.0) {
            return domain(format!("variance must be >= 0, got {}", self.variance));
        }
        if !self.mean.is_finite() {
            return domain("mean must be finite");
        }
        Ok(())
    }
}

/// Largest grid for which the dense covariance is factorized.
pub const MAX_GP_CELLS: usize = 10_000;

/// A factorized field ready for repeated draws.
#[derive(Debug, Clone)]
pub struct GaussianField {
    cfg: GpConfig,
    cells: usize,
    chol: Option<DMatrix<f64>>,
    /// Diagonal jitter that was needed for the factorization.
    pub jitter: f64,
}

impl GaussianField {
    pub fn new(grid: &GridSpec, cfg: GpConfig) -> Result<Self> {
        cfg.validate()?;
        let m = grid.cells();
        if m > MAX_GP_CELLS {
            return domain(format!("grid of {m} cells exceeds the {MAX_GP_CELLS}-cell field limit"));
        }
        if cfg.variance == 0.0 {
            return Ok(Self { cfg, cells: m, chol: None, jitter: 0.0 });
        }
        let two_l2 = 2.0 * cfg.length_scale * cfg.length_scale;
        let cov = DMatrix::from_fn(m, m, |i, j| {
            let (ri, ci) = grid.row_col(i);
            let (rj, cj) = grid.row_col(j);
            let d2 = (ri as f64 - rj as f64).powi(2) + (ci as f64 - cj as f64).powi(2);
            cfg.variance * (-d2 / two_l2).exp()
        });
        let mut tried = Vec::new();
        for jitter in std::iter::once(0.0).chain((0..8).map(|e| cfg.variance * 10f64.powi(e - 10))) {
            let mut k = cov.clone();
            for i in 0..m {
                k[(i, i)] += jitter;
            }
            if let Some(ch) = k.cholesky() {
                if jitter > 0.0 {
                    log::debug!("field covariance needed jitter {jitter:e}");
                }
                return Ok(Self { cfg, cells: m, chol: Some(ch.l()), jitter });
            }
            tried.push(format!("{jitter:e}"));
        }
        Err(AcsError::Numerical(format!(
            "covariance factorization failed with jitter values [{}]",
            tried.join(", ")
        )))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.chol {
            None => vec![self.cfg.mean; self.cells],
            Some(l) => {
                let z = DVector::from_fn(self.cells, |_, _| rng.sample::<f64, _>(StandardNormal));
                (l * z).iter().map(|v| v + self.cfg.mean).collect()
            }
        }
    }
}

/// One draw of a single-covariate field, deterministic given `seed`.
pub fn simulate_covariate(grid: &GridSpec, cfg: &GpConfig, seed: u64) -> Result<CovariateField> {
    let field = GaussianField::new(grid, *cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let column = field.sample(&mut rng);
    CovariateField::from_columns(grid.cells(), &[column])
}
