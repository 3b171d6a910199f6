mod common;

use acs_core::covariate::CovariateField;
use acs_core::dist::PriorConfig;
use acs_core::mcmc::{run_chain, update_alpha, update_beta, update_theta, Blocks, McmcConfig, RandomWalk, ThetaTarget};
use acs_core::population::ModelParams;
use acs_core::survey::{replay_draws, SamplingMode, StageWeights};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{intercept_ln, ks_against_density, population, trunc_beta_ln};

/// The independence proposal ignores the truncation factor, which matters
/// most when `n` is tiny; thinning keeps 2000 nearly independent draws.
const THIN: usize = 10;

#[test]
fn alpha_draws_follow_the_truncated_beta_conditional() {
    let priors = PriorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (x, cells) in [(1, 9), (3, 400), (40, 400)] {
        let mut alpha = 0.2;
        let draws: Vec<f64> = (0..2000 * THIN)
            .map(|_| {
                alpha = update_alpha(alpha, x, cells, &priors, &mut rng).0;
                alpha
            })
            .step_by(THIN)
            .collect();
        let ks = ks_against_density(&draws, 0.0, 1.0, 10_000, |q| trunc_beta_ln(q, x, cells, 3.0, 15.0));
        assert!(ks < 0.05, "x={x} M={cells}: {ks}");
    }
}

#[test]
fn beta_draws_follow_the_truncated_beta_conditional() {
    let priors = PriorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (p, x) in [(1, 1), (1, 2), (4, 40)] {
        let mut beta = 0.2;
        let draws: Vec<f64> = (0..2000 * THIN)
            .map(|_| {
                beta = update_beta(beta, p, x, &priors, &mut rng).0;
                beta
            })
            .step_by(THIN)
            .collect();
        let ks = ks_against_density(&draws, 0.0, 1.0, 10_000, |q| trunc_beta_ln(q, p, x, 1.0, 9.0));
        assert!(ks < 0.05, "p={p} x={x}: {ks}");
    }
}

#[test]
fn intercept_draws_follow_the_truncated_poisson_posterior() {
    let cov = CovariateField::intercept_only(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for counts in [vec![3u64], vec![2, 3, 1]] {
        let cells: Vec<(usize, u64)> = counts.iter().copied().enumerate().collect();
        let target = ThetaTarget { covariates: &cov, cells, sigma2: 100.0 };
        let walk = RandomWalk::identity(1, 1.0);
        let mut theta = vec![0.0];
        for _ in 0..1000 {
            update_theta(&mut theta, &target, &walk, &mut rng);
        }
        let mut draws = Vec::with_capacity(2000);
        for i in 0..2000 * 20 {
            update_theta(&mut theta, &target, &walk, &mut rng);
            if i % 20 == 19 {
                draws.push(theta[0]);
            }
        }
        let ks = ks_against_density(&draws, -15.0, 6.0, 10_000, |t| intercept_ln(t, &counts, 100.0));
        assert!(ks < 0.05, "{counts:?}: {ks}");
    }
}

#[test]
fn census_chain_targets_the_intercept_posterior() {
    let counts = [0, 2, 0, 0, 3, 0, 0, 0, 1];
    let pop = population(3, 3, &counts);
    // one draw per network covers the grid
    let seeds: Vec<usize> = pop.networks.networks.iter().map(|n| n.members[0]).collect();
    let log = replay_draws(&pop, SamplingMode::Network, vec![StageWeights::Constant(1.0)], seeds.len(), &seeds).unwrap();
    let cfg = McmcConfig {
        iterations: 1000 + 2000 * 20,
        burn_in: 1000,
        thin: 20,
        blocks: Blocks { theta: true, alpha: false, beta: false, latent: true, rho: false },
        init: Some(ModelParams { theta: vec![0.0], alpha: 0.3, beta: 0.5, rho: None }),
        ..McmcConfig::default()
    };
    let out = run_chain(&log, &pop.covariates, &cfg, 5).unwrap();
    assert_eq!(out.draws.len(), 2000);
    assert!(out.draws.iter().all(|d| d.total == 6));
    let draws: Vec<f64> = out.draws.iter().map(|d| d.theta[0]).collect();
    let ks = ks_against_density(&draws, -15.0, 6.0, 10_000, |t| intercept_ln(t, &[2, 3, 1], 100.0));
    assert!(ks < 0.05, "{ks}");
}
