//! Adaptive cluster sampling of rare, clustered populations on a grid, with a
//! disaggregated Bayesian model for predicting the population total.
//!
//! The crate covers the whole pipeline:
//!
//! * [`grid`]: lattice geometry and network extraction,
//! * [`population`] and [`covariate`]: simulating populations,
//! * [`survey`]: single- and two-stage adaptive cluster samples and their
//!   selection probability,
//! * [`mcmc`]: the Metropolis-within-Gibbs sampler,
//! * [`estimate`]: posterior summaries, the Raj baseline, Geweke diagnostics
//!   and replication metrics,
//! * [`experiment`]: configuration-driven replicated studies.
//!
//! ```
//! use acs_core::prelude::*;
//!
//! let grid = GridSpec::new(10, 10).unwrap();
//! let covariates = simulate_covariate(&grid, &GpConfig::default(), 1).unwrap();
//! let params = ModelParams { theta: vec![1.5, 0.5], alpha: 0.1, beta: 0.2, rho: None };
//! let population = generate_population(&grid, &covariates, &params, None, 7).unwrap();
//! assert!(population.is_usable());
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod covariate;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod grid;
pub mod mcmc;
pub mod population;
pub mod seed;
pub mod survey;

pub use error::{AcsError, Result};

/// The most commonly used items.
pub mod prelude {
    pub use crate::covariate::{simulate_covariate, CovariateField, GpConfig};
    pub use crate::error::{AcsError, Result};
    pub use crate::estimate::{geweke_z, raj_estimator, summarize_metrics, total_posterior, PosteriorSummary};
    pub use crate::grid::{extract_networks, GridSpec};
    pub use crate::mcmc::{run_chain, run_chains, McmcConfig};
    pub use crate::population::{generate_population, ModelParams, PopulationGrid};
    pub use crate::survey::{acs_draw, two_stage_sample, SampleLog, SamplingMode, WeightField};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
