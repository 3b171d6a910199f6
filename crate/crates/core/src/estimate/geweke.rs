//! Geweke comparison of early and late chain segments.

use serde::{Deserialize, Serialize};

use crate::error::{AcsError, Result};

pub const GEWEKE_FRAC_A: f64 = 0.1;
pub const GEWEKE_FRAC_B: f64 = 0.5;

/// Estimator of the spectral density at frequency zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    /// Autoregressive fit with order chosen by AIC.
    #[default]
    Autoregressive,
    /// Bartlett-weighted autocovariances over `fraction * n` lags.
    Bartlett { fraction: f64 },
}

fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag).map(|h| d[h..].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / n as f64).collect()
}

/// Yule-Walker AR fit by Levinson-Durbin; order up to `10 log10 n` by AIC.
fn spectrum0_ar(x: &[f64]) -> f64 {
    let n = x.len();
    let max_order = ((10.0 * (n as f64).log10()).floor() as usize).min(n - 1);
    let g = autocovariances(x, max_order);
    if !(g[0] > 0.0) {
        return 0.0;
    }
    let nf = n as f64;
    let mut best = (nf * g[0].ln(), 0usize, g[0], Vec::new());
    let mut phi: Vec<f64> = Vec::new();
    let mut v = g[0];
    for p in 1..=max_order {
        let k = (g[p] - phi.iter().enumerate().map(|(i, a)| a * g[p - 1 - i]).sum::<f64>()) / v;
        let prev = phi.clone();
        for i in 0..phi.len() {
            phi[i] = prev[i] - k * prev[prev.len() - 1 - i];
        }
        phi.push(k);
        v *= 1.0 - k * k;
        if !(v > 0.0) {
            break;
        }
        let aic = nf * v.ln() + 2.0 * p as f64;
        if aic < best.0 {
            best = (aic, p, v, phi.clone());
        }
    }
    let (_, order, var, coef) = best;
    let var_pred = var * nf / (nf - (order + 1) as f64);
    var_pred / (1.0 - coef.iter().sum::<f64>()).powi(2)
}

fn spectrum0_bartlett(x: &[f64], fraction: f64) -> f64 {
    let lags = ((fraction * x.len() as f64).floor() as usize).min(x.len() - 1);
    let g = autocovariances(x, lags);
    let s0 = g[0] + (1..=lags).map(|h| 2.0 * (1.0 - h as f64 / (lags + 1) as f64) * g[h]).sum::<f64>();
    s0.max(0.0)
}

/// Variance of the segment mean.
fn mean_variance(x: &[f64], method: SpectralMethod) -> f64 {
    let s0 = match method {
        SpectralMethod::Autoregressive => spectrum0_ar(x),
        SpectralMethod::Bartlett { fraction } => spectrum0_bartlett(x, fraction),
    };
    s0 / x.len() as f64
}

/// `z = (mean_a - mean_b) / sqrt(var_a + var_b)` over the first `frac_a` and
/// last `frac_b` of the draws, with autoregressive spectral variances.
pub fn geweke_z(draws: &[f64], frac_a: f64, frac_b: f64) -> Result<f64> {
    geweke_z_with(draws, frac_a, frac_b, SpectralMethod::default())
}

pub fn geweke_z_with(draws: &[f64], frac_a: f64, frac_b: f64, method: SpectralMethod) -> Result<f64> {
    if draws.len() < 100 {
        return Err(AcsError::UndefinedDiagnostic(format!("need at least 100 draws, got {}", draws.len())));
    }
    if !(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b < 1.0) {
        return Err(AcsError::Domain(format!("invalid segment fractions {frac_a} and {frac_b}")));
    }
    if let SpectralMethod::Bartlett { fraction } = method {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(AcsError::Domain(format!("invalid Bartlett lag fraction {fraction}")));
        }
    }
    let n = draws.len();
    let na = ((frac_a * n as f64).floor() as usize).max(2);
    let nb = ((frac_b * n as f64).floor() as usize).max(2);
    let (a, b) = (&draws[..na], &draws[n - nb..]);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = mean_variance(a, method) + mean_variance(b, method);
    if !(var > 0.0) || !var.is_finite() {
        return Err(AcsError::UndefinedDiagnostic("segment variance is zero".into()));
    }
    Ok((mean(a) - mean(b)) / var.sqrt())
}
