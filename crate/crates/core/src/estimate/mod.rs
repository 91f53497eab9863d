//! Monte Carlo estimators over simulated paths.

pub mod density;
pub mod krylov;
pub mod mc;
pub mod semigroup;
pub mod testfn;

use serde::{Deserialize, Serialize};

use crate::model::{DiffusionSpec, DriftSpec};
use crate::paths::TimeGrid;

pub use density::{density_histogram, DensityHistogram};
pub use krylov::{
    default_probes, default_starts, estimate_kappa, held_out_probes, khasminskii_gamma, kr2_bound, krylov_functional,
    occupation_functionals, KappaEstimate, KappaRatio, KhasminskiiGamma, KrylovExponents, KrylovParams, KrylovValue,
};
pub use mc::{log_sum_exp, pairwise_sum, McEstimate, Moments};
pub use semigroup::{
    entropy_from_batch, entropy_weight, mc_semigroup, sample_coupled, sample_terminals, weight_moment,
    weight_moment_from_batch, weighted_semigroup, CoupledBatch, EntropyEstimate, TerminalBatch,
};
pub use testfn::{SpaceTimeFn, TestFunction};

/// Everything an estimator needs besides the test function and start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub grid: TimeGrid,
    pub n_samples: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn new(drift: DriftSpec, diffusion: DiffusionSpec, grid: TimeGrid, n_samples: usize, seed: u64) -> Self {
        Self {
            drift,
            diffusion,
            grid,
            n_samples,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_samples(&self, n_samples: usize) -> Self {
        Self {
            n_samples,
            ..self.clone()
        }
    }
}
