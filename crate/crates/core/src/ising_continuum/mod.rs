//! The continuum Ising model on `[0, T]`.
//!
//! Paths of the rate-1 random walk on `{-1, +1}` are reweighted by
//! `exp(α ∬_{[0,T]²} g(t-s) X_s X_t ds dt)`. This module samples that path
//! measure with a birth/death/relocate Metropolis–Hastings chain and builds
//! the correlation, partition-function, vacuum-overlap and susceptibility
//! estimators on top of it.

mod chain;
mod estimators;
mod overlap;
mod path;

pub use chain::{mcmc_step, ChainState, MoveKind, MoveStats, StepOutcome, DRIFT_CHECK_INTERVAL};
pub use estimators::{
    estimate_correlation, estimate_correlations, estimate_partition_function_direct,
    estimate_susceptibility, run_chains, ChainSamples, PartitionEstimate,
};
pub use overlap::{
    estimate_partition_ratio, estimate_rho_ratio, estimate_rho_series, overlap_upper_bound,
    CorrelationSource, RhoRatioReport, SeriesReport, SeriesSettings, MAX_SERIES_ORDER,
};
pub use path::{cross_interaction, path_energy, path_interaction, Spin, SpinPath};
pub use crate::stats::RunSettings;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// `α(λ) = λ²/8`.
pub fn alpha_from_lambda(lambda: f64) -> f64 {
    lambda * lambda / 8.0
}

/// Parameters of the continuum Ising measure.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingParams {
    pub alpha: f64,
    pub horizon: f64,
    pub kernel: Kernel,
    /// Fix `X_0 = +1`; sampling then targets `P_{α,T}(· | X_0 = 1)`.
    pub condition_start: bool,
}

impl IsingParams {
    pub fn new(alpha: f64, horizon: f64, kernel: Kernel) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidModel(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidModel(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(IsingParams {
            alpha,
            horizon,
            kernel,
            condition_start: false,
        })
    }

    pub fn from_lambda(lambda: f64, horizon: f64, kernel: Kernel) -> Result<Self> {
        Self::new(alpha_from_lambda(lambda), horizon, kernel)
    }

    pub fn conditioned(mut self) -> Self {
        self.condition_start = true;
        self
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let mut p = Self::new(self.alpha, horizon, self.kernel.clone())?;
        p.condition_start = self.condition_start;
        Ok(p)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = Self::new(alpha, self.horizon, self.kernel.clone())?;
        p.condition_start = self.condition_start;
        Ok(p)
    }
}

/// Move proposal weights: single insert/delete, relocate, global flip, and
/// insert/delete of an adjacent jump pair (a short excursion).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveMix {
    pub insert: f64,
    pub delete: f64,
    pub relocate: f64,
    pub flip: f64,
    pub pair_insert: f64,
    pub pair_delete: f64,
}

impl Default for MoveMix {
    fn default() -> Self {
        MoveMix {
            insert: 0.25,
            delete: 0.25,
            relocate: 0.20,
            flip: 0.10,
            pair_insert: 0.10,
            pair_delete: 0.10,
        }
    }
}

impl MoveMix {
    /// Weights with the flip move removed and the rest renormalized.
    pub fn without_flip(&self) -> Self {
        let total = 1.0 - self.flip;
        MoveMix {
            insert: self.insert / total,
            delete: self.delete / total,
            relocate: self.relocate / total,
            flip: 0.0,
            pair_insert: self.pair_insert / total,
            pair_delete: self.pair_delete / total,
        }
    }
}
