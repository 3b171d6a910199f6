mod common;

use std::collections::BTreeMap;

use acs_core::mcmc::{LatentModel, LatentState, LatentTally};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{corner_log, latent_xp_posterior_fixed, total_variation, CORNER_LAMBDA};

#[test]
fn enumeration_is_a_distribution() {
    let post = latent_xp_posterior_fixed(&corner_log(), &CORNER_LAMBDA, 3, 0.3, 0.4);
    let total: f64 = post.values().sum();
    assert!((total - 1.0).abs() < 1e-12);
    // five free cells in a path: at most five hidden cells
    assert!(post.keys().all(|&(x, p)| (1..=6).contains(&x) && p <= x));
    assert!(post.len() > 5);
}

#[test]
fn latent_moves_reach_the_enumerated_posterior() {
    let log = corner_log();
    let (alpha, beta, retries) = (0.3, 0.4, 3);
    let exact = latent_xp_posterior_fixed(&log, &CORNER_LAMBDA, retries, alpha, beta);
    let model = LatentModel::new(&log, 5, retries).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut latent = LatentState::empty();
    let mut tally = LatentTally::default();
    let sweeps = 40_000;
    let mut freq: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for _ in 0..sweeps {
        model.update(&mut latent, alpha, beta, &CORNER_LAMBDA, &CORNER_LAMBDA, &mut tally, &mut rng);
        *freq.entry((1 + latent.x_bar, 1 + latent.p_bar)).or_insert(0.0) += 1.0 / sweeps as f64;
    }
    let tv = total_variation(&exact, &freq);
    assert!(tv < 0.05, "tv {tv}\nexact {exact:?}\nchain {freq:?}");
    assert!(tally.accepted > 1000);
}
