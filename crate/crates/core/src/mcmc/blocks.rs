//! Single-block updates: regression coefficients, structure probabilities
//! and occupancy coefficients.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::covariate::CovariateField;
use crate::dist::{ln_one_minus_exp_neg, PriorConfig};
use crate::grid::Cell;

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `ln(1 - (1 - q)^n)`, the log normalizer of a zero-truncated binomial.
pub(crate) fn ln_trunc_norm(q: f64, n: usize) -> f64 {
    ln_one_minus_exp_neg(-(n as f64) * (-q).ln_1p())
}

/// Zero-truncated Poisson log-likelihood of the observed cells, plus the
/// normal prior, as a function of the regression coefficients.
#[derive(Debug, Clone)]
pub struct ThetaTarget<'a> {
    pub covariates: &'a CovariateField,
    /// `(cell, count)` pairs entering the likelihood.
    pub cells: Vec<(Cell, u64)>,
    pub sigma2: f64,
}

impl ThetaTarget<'_> {
    /// Log density up to a constant free of `theta`.
    pub fn ln_density(&self, theta: &[f64]) -> f64 {
        let mut lp = -theta.iter().map(|t| t * t).sum::<f64>() / (2.0 * self.sigma2);
        for &(c, eta) in &self.cells {
            let lin = self.covariates.linear(c, theta);
            let lambda = lin.exp();
            lp += eta as f64 * lin - lambda - ln_one_minus_exp_neg(lambda);
        }
        lp
    }
}

/// Bernoulli-logistic occupancy likelihood plus normal prior.
#[derive(Debug, Clone)]
pub struct RhoTarget<'a> {
    pub covariates: &'a CovariateField,
    /// `(cell, occupied)` for every known cell.
    pub cells: Vec<(Cell, bool)>,
    pub sigma2: f64,
}

impl RhoTarget<'_> {
    pub fn ln_density(&self, rho: &[f64]) -> f64 {
        let mut lp = -rho.iter().map(|t| t * t).sum::<f64>() / (2.0 * self.sigma2);
        for &(c, occupied) in &self.cells {
            let lin = self.covariates.linear(c, rho);
            lp -= if occupied { softplus(-lin) } else { softplus(lin) };
        }
        lp
    }
}

/// `nu(c) = 1 / (1 + exp(-v_c' rho))`.
pub fn occupancy_probability(covariates: &CovariateField, cell: Cell, rho: &[f64]) -> f64 {
    1.0 / (1.0 + (-covariates.linear(cell, rho)).exp())
}

/// Gaussian random-walk proposal `x + sqrt(scale) * L z`.
#[derive(Debug, Clone)]
pub struct RandomWalk {
    chol: DMatrix<f64>,
    pub scale: f64,
}

impl RandomWalk {
    pub fn identity(dim: usize, scale: f64) -> Self {
        Self { chol: DMatrix::identity(dim, dim), scale }
    }

    /// Covariance `scale * (V'V)^-1` over the given design rows; identity when
    /// `V'V` is singular.
    pub fn inverse_gram(covariates: &CovariateField, cells: impl Iterator<Item = Cell>, scale: f64) -> Self {
        let dim = covariates.k() + 1;
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        for c in cells {
            let v = DVector::from_column_slice(covariates.row(c));
            gram += &v * v.transpose();
        }
        let chol = gram
            .clone()
            .try_inverse()
            .and_then(|inv| inv.cholesky())
            .map(|ch| ch.l());
        match chol {
            Some(chol) => Self { chol, scale },
            None => {
                log::debug!("design gram matrix is singular; using identity proposal covariance");
                Self::identity(dim, scale)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * z * self.scale.sqrt();
        current.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    }
}

/// Metropolis acceptance of a log ratio.
pub(crate) fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// One random-walk step on a log density; returns whether it moved.
pub(crate) fn rw_step<R, F>(state: &mut Vec<f64>, current_lp: &mut f64, walk: &RandomWalk, target: F, rng: &mut R) -> bool
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let proposal = walk.propose(state, rng);
    let lp = target(&proposal);
    if accept(lp - *current_lp, rng) {
        *state = proposal;
        *current_lp = lp;
        true
    } else {
        false
    }
}

/// Random-walk update of the count-regression coefficients.
pub fn update_theta<R: Rng + ?Sized>(
    theta: &mut Vec<f64>,
    target: &ThetaTarget<'_>,
    walk: &RandomWalk,
    rng: &mut R,
) -> bool {
    let mut lp = target.ln_density(theta);
    rw_step(theta, &mut lp, walk, |t| target.ln_density(t), rng)
}

/// Random-walk update of the occupancy coefficients.
pub fn update_rho<R: Rng + ?Sized>(rho: &mut Vec<f64>, target: &RhoTarget<'_>, walk: &RandomWalk, rng: &mut R) -> bool {
    let mut lp = target.ln_density(rho);
    rw_step(rho, &mut lp, walk, |t| target.ln_density(t), rng)
}

/// Independence step for a truncated-binomial success probability.
///
/// The target is `q^(k+a-1) (1-q)^(n-k+b-1) / (1 - (1-q)^n)`; the proposal
/// is the Beta density without the truncation factor, so only that factor
/// survives in the ratio.
fn trunc_beta_step<R: Rng + ?Sized>(current: f64, k: usize, n: usize, a: f64, b: f64, rng: &mut R) -> (f64, bool) {
    debug_assert!(k <= n);
    let Ok(law) = Beta::new(k as f64 + a, (n - k) as f64 + b) else {
        return (current, false);
    };
    let proposal = law.sample(rng);
    if !(proposal > 0.0 && proposal < 1.0) {
        return (current, false);
    }
    let log_ratio = ln_trunc_norm(current, n) - ln_trunc_norm(proposal, n);
    if accept(log_ratio, rng) {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Update `alpha` given `x` nonempty cells out of `cells`.
pub fn update_alpha<R: Rng + ?Sized>(alpha: f64, x: usize, cells: usize, priors: &PriorConfig, rng: &mut R) -> (f64, bool) {
    trunc_beta_step(alpha, x, cells, priors.a_alpha, priors.b_alpha, rng)
}

/// Update `beta` given `p` networks over `x` nonempty cells.
pub fn update_beta<R: Rng + ?Sized>(beta: f64, p: usize, x: usize, priors: &PriorConfig, rng: &mut R) -> (f64, bool) {
    trunc_beta_step(beta, p, x, priors.a_beta, priors.b_beta, rng)
}

/// Log full conditional of `alpha` (unnormalized).
pub fn alpha_ln_density(alpha: f64, x: usize, cells: usize, priors: &PriorConfig) -> f64 {
    trunc_beta_ln_density(alpha, x, cells, priors.a_alpha, priors.b_alpha)
}

/// Log full conditional of `beta` (unnormalized).
pub fn beta_ln_density(beta: f64, p: usize, x: usize, priors: &PriorConfig) -> f64 {
    trunc_beta_ln_density(beta, p, x, priors.a_beta, priors.b_beta)
}

fn trunc_beta_ln_density(q: f64, k: usize, n: usize, a: f64, b: f64) -> f64 {
    if !(q > 0.0 && q < 1.0) {
        return f64::NEG_INFINITY;
    }
    (k as f64 + a - 1.0) * q.ln() + ((n - k) as f64 + b - 1.0) * (-q).ln_1p() - ln_trunc_norm(q, n)
}

/// Acceptance-rate driven scale tuning used during burn-in.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Adapter {
    accepted: usize,
    tried: usize,
}

impl Adapter {
    pub(crate) const WINDOW: usize = 50;
    const LOW: f64 = 0.25;
    const HIGH: f64 = 0.45;

    pub(crate) fn new() -> Self {
        Self { accepted: 0, tried: 0 }
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        self.tried += 1;
        self.accepted += usize::from(accepted);
    }

    /// Rescale after a full window; resets the window.
    pub(crate) fn tune(&mut self, scale: &mut f64) {
        if self.tried < Self::WINDOW {
            return;
        }
        let rate = self.accepted as f64 / self.tried as f64;
        if rate < Self::LOW {
            *scale *= if rate < 0.05 { 0.3 } else { 0.6 };
        } else if rate > Self::HIGH {
            *scale *= if rate > 0.8 { 3.0 } else { 1.6 };
        }
        *self = Self::new();
    }
}
