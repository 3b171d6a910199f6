//! Log-densities and samplers for the count, structure and proposal laws.
//!
//! All probabilities are carried in log space with log-gamma factorials,
//! since the joint density multiplies hundreds of such terms.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::factorial::ln_factorial;

use crate::error::{domain, AcsError, Result};

/// `ln(1 - exp(-a))` for `a > 0`, accurate at both ends.
pub fn ln_one_minus_exp_neg(a: f64) -> f64 {
    if a < std::f64::consts::LN_2 {
        (-(-a).exp_m1()).ln()
    } else {
        (-(-a).exp()).ln_1p()
    }
}

pub fn ln_fact(n: u64) -> f64 {
    ln_factorial(n)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Zero-truncated Poisson on `{1, 2, ...}`.
#[derive(Debug, Clone)]
pub struct TruncPoisson {
    lambda: f64,
    ln_norm: f64,
    poisson: Option<Poisson<f64>>,
}

impl TruncPoisson {
    /// Below this intensity, sampling switches from rejection to inversion.
    const REJECTION_MIN: f64 = 0.1;
    const INVERSION_CAP: u64 = 200;

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return domain(format!("truncated Poisson needs finite lambda > 0, got {lambda}"));
        }
        let poisson = if lambda >= Self::REJECTION_MIN {
            Some(Poisson::new(lambda).map_err(|e| AcsError::Domain(format!("lambda {lambda}: {e}")))?)
        } else {
            None
        };
        Ok(Self { lambda, ln_norm: ln_one_minus_exp_neg(lambda), poisson })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        -self.lambda + k as f64 * self.lambda.ln() - ln_fact(k) - self.ln_norm
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.poisson {
            Some(p) => loop {
                let k = p.sample(rng) as u64;
                if k >= 1 {
                    return k;
                }
            },
            None => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                for k in 1..Self::INVERSION_CAP {
                    cum += self.ln_pmf(k).exp();
                    if u < cum {
                        return k;
                    }
                }
                Self::INVERSION_CAP
            }
        }
    }
}

/// Zero-truncated binomial on `{1, ..., n}`.
#[derive(Debug, Clone, Copy)]
pub struct TruncBinomial {
    n: u64,
    p: f64,
    ln_norm: f64,
}

impl TruncBinomial {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if n == 0 {
            return domain("truncated binomial needs n >= 1");
        }
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("truncated binomial needs p in (0,1), got {p}"));
        }
        // 1 - (1-p)^n = 1 - exp(n ln(1-p))
        let a = -(n as f64) * (-p).ln_1p();
        Ok(Self { n, p, ln_norm: ln_one_minus_exp_neg(a) })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        if k == 0 || k > self.n {
            return f64::NEG_INFINITY;
        }
        ln_choose(self.n, k) + k as f64 * self.p.ln() + (self.n - k) as f64 * (-self.p).ln_1p()
            - self.ln_norm
    }

    /// Exact inverse-cdf draw over the finite support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let odds = (self.p / (1.0 - self.p)).ln();
        let mut lp = self.ln_pmf(1);
        let mut cum = 0.0;
        for k in 1..self.n {
            cum += lp.exp();
            if u < cum {
                return k;
            }
            lp += ((self.n - k) as f64 / (k + 1) as f64).ln() + odds;
        }
        self.n
    }
}

/// `1 + Multinomial(total, uniform over bins)`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedMultinomial {
    total: u64,
    bins: usize,
}

impl ShiftedMultinomial {
    pub fn new(total: u64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return domain("shifted multinomial needs at least one bin");
        }
        Ok(Self { total, bins })
    }

    pub fn ln_pmf(&self, y: &[usize]) -> f64 {
        if y.len() != self.bins || y.iter().any(|&v| v < 1) {
            return f64::NEG_INFINITY;
        }
        let excess: u64 = y.iter().map(|&v| (v - 1) as u64).sum();
        if excess != self.total {
            return f64::NEG_INFINITY;
        }
        let mut lp = ln_fact(self.total) - self.total as f64 * (self.bins as f64).ln();
        for &v in y {
            lp -= ln_fact((v - 1) as u64);
        }
        lp
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut y = vec![1usize; self.bins];
        for _ in 0..self.total {
            y[rng.random_range(0..self.bins)] += 1;
        }
        y
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub sigma2_theta: f64,
    pub a_alpha: f64,
    pub b_alpha: f64,
    pub a_beta: f64,
    pub b_beta: f64,
    pub sigma2_rho: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { sigma2_theta: 100.0, a_alpha: 3.0, b_alpha: 15.0, a_beta: 1.0, b_beta: 9.0, sigma2_rho: 100.0 }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma2_theta, self.a_alpha, self.b_alpha, self.a_beta, self.b_beta, self.sigma2_rho];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            domain(format!("prior hyperparameters must be positive: {self:?}"))
        }
    }
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// Multivariate normal kept in Cholesky form.
#[derive(Debug, Clone)]
pub struct MvNormal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    ln_det: f64,
}

impl MvNormal {
    pub fn new(mean: &[f64], cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return domain("covariance shape does not match mean");
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| AcsError::Numerical("covariance not positive definite".into()))?
            .l();
        let ln_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { mean: DVector::from_column_slice(mean), chol, ln_det })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor of the covariance.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let z = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has positive diagonal");
        let d = self.dim() as f64;
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.ln_det + z.norm_squared())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.mean + &self.chol * z).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trunc_poisson_closed_form() {
        let d = TruncPoisson::new(1.0).unwrap();
        // e^-1 / (1 - e^-1)
        assert!((d.ln_pmf(1).exp() - 0.581_976_706_869_326_4).abs() < 1e-12);
        assert_eq!(d.ln_pmf(0), f64::NEG_INFINITY);
    }

    #[test]
    fn trunc_poisson_sums_to_one() {
        for lambda in [0.01, 0.5, 5.0, 30.0] {
            let d = TruncPoisson::new(lambda).unwrap();
            let cap = if lambda > 10.0 { 400 } else { 200 };
            let s: f64 = (1..=cap).map(|k| d.ln_pmf(k).exp()).sum();
            assert!((s - 1.0).abs() < 1e-12, "lambda {lambda}: {s}");
        }
    }

    #[test]
    fn trunc_poisson_rejects_bad_lambda() {
        assert!(TruncPoisson::new(0.0).is_err());
        assert!(TruncPoisson::new(-1.0).is_err());
        assert!(TruncPoisson::new(f64::NAN).is_err());
        assert!(TruncPoisson::new(f64::INFINITY).is_err());
    }

    #[test]
    fn trunc_binomial_small_cases() {
        let d = TruncBinomial::new(2, 0.5).unwrap();
        assert!((d.ln_pmf(1).exp() - 2.0 / 3.0).abs() < 1e-14);
        assert!((d.ln_pmf(2).exp() - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(d.ln_pmf(0), f64::NEG_INFINITY);
        for p in [0.01, 0.5, 0.99] {
            assert!(TruncBinomial::new(1, p).unwrap().ln_pmf(1).abs() < 1e-12);
        }
        assert!(TruncBinomial::new(3, 0.0).is_err());
        assert!(TruncBinomial::new(3, 1.0).is_err());
        assert!(TruncBinomial::new(0, 0.5).is_err());
    }

    #[test]
    fn trunc_binomial_large_n_does_not_underflow() {
        let d = TruncBinomial::new(10_000, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean = (0..2000).map(|_| d.sample(&mut rng) as f64).sum::<f64>() / 2000.0;
        assert!((mean - 1000.0).abs() < 10.0, "{mean}");
    }

    #[test]
    fn shifted_multinomial_cases() {
        let d = ShiftedMultinomial::new(0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(d.sample(&mut rng), vec![1, 1, 1]);
        assert!(d.ln_pmf(&[1, 1, 1]).abs() < 1e-15);

        let d = ShiftedMultinomial::new(4, 1).unwrap();
        assert_eq!(d.sample(&mut rng), vec![5]);
        assert!(d.ln_pmf(&[5]).abs() < 1e-15);

        // outcomes (3,1), (2,2), (1,3) carry 1/4, 1/2, 1/4
        let d = ShiftedMultinomial::new(2, 2).unwrap();
        assert!((d.ln_pmf(&[2, 2]).exp() - 0.5).abs() < 1e-15);
        assert!((d.ln_pmf(&[3, 1]).exp() - 0.25).abs() < 1e-15);
        assert!((d.ln_pmf(&[1, 3]).exp() - 0.25).abs() < 1e-15);
        assert_eq!(d.ln_pmf(&[0, 4]), f64::NEG_INFINITY);
        assert_eq!(d.ln_pmf(&[2, 3]), f64::NEG_INFINITY);
        assert_eq!(d.ln_pmf(&[4]), f64::NEG_INFINITY);
    }

    #[test]
    fn pmfs_continuous_in_parameters() {
        let h = 1e-6;
        for k in 1..10 {
            let a = TruncPoisson::new(2.0).unwrap().ln_pmf(k);
            let b = TruncPoisson::new(2.0 + h).unwrap().ln_pmf(k);
            assert!((a - b).abs() < 1e-4);
            let a = TruncBinomial::new(10, 0.3).unwrap().ln_pmf(k);
            let b = TruncBinomial::new(10, 0.3 + h).unwrap().ln_pmf(k);
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn beta_density_integrates_to_one() {
        let n = 20_000;
        let s: f64 = (0..n)
            .map(|i| beta_ln_pdf((i as f64 + 0.5) / n as f64, 3.0, 15.0).exp() / n as f64)
            .sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mvnormal_standard_density() {
        let d = MvNormal::new(&[0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let expected = -(2.0 * std::f64::consts::PI).ln();
        assert!((d.ln_pdf(&[0.0, 0.0]) - expected).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mut m = [0.0; 2];
        for _ in 0..n {
            let x = d.sample(&mut rng);
            m[0] += x[0] / n as f64;
            m[1] += x[1] / n as f64;
        }
        assert!(m[0].abs() < 0.03 && m[1].abs() < 0.03);
    }
}
