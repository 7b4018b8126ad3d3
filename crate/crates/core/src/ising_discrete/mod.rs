//! The lattice discretization of the continuum Ising model.
//!
//! Sites are the grid points `kδ`, `0 ≤ k ≤ N`, `δ = T/N`. Nearest neighbours
//! couple with `J = -½ log δ`, all other pairs with `J = 2αδ² g(|i-j|δ)`; the
//! weight of a configuration is `exp(Σ_{i<j} J_ij σ_i σ_j)`. Exact enumeration
//! covers small `N`; two Metropolis samplers and the Edwards–Sokal coupling
//! cover the rest.

mod exact;
mod fk;
mod mcmc;

pub use exact::{exact_correlation, exact_fk_two_point, ENUMERATION_LIMIT, FK_ENUMERATION_LIMIT};
pub use fk::{bond_percolation_two_point, fk_from_spins, FKConfig};
pub use mcmc::{fk_two_point_mcmc, mcmc_correlation, wall_correlation, WallChain};

use crate::error::{Error, Result};
use crate::kernel::Kernel;

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeModel {
    horizon: f64,
    n: usize,
    alpha: f64,
    kernel: Kernel,
    /// Coupling by lag; index 0 unused.
    lag_coupling: Vec<f64>,
}

impl LatticeModel {
    pub fn new(horizon: f64, n: usize, alpha: f64, kernel: Kernel) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidModel(format!("horizon must be > 0, got {horizon}")));
        }
        if n == 0 {
            return Err(Error::InvalidModel("N must be >= 1".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidModel(format!("alpha must be >= 0, got {alpha}")));
        }
        let delta = horizon / n as f64;
        if delta >= 1.0 {
            return Err(Error::InvalidModel(format!(
                "grid spacing T/N = {delta} must be < 1 for a ferromagnetic neighbour coupling"
            )));
        }
        let mut lag_coupling = vec![0.0; n + 1];
        if n >= 1 {
            lag_coupling[1] = -0.5 * delta.ln();
        }
        for (lag, j) in lag_coupling.iter_mut().enumerate().skip(2) {
            *j = 2.0 * alpha * delta * delta * kernel.eval(lag as f64 * delta)?;
        }
        Ok(LatticeModel {
            horizon,
            n,
            alpha,
            kernel,
            lag_coupling,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of grid intervals `N`.
    pub fn intervals(&self) -> usize {
        self.n
    }

    /// Number of sites `N + 1`.
    pub fn sites(&self) -> usize {
        self.n + 1
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn lag_coupling(&self, lag: usize) -> f64 {
        if lag == 0 || lag > self.n {
            0.0
        } else {
            self.lag_coupling[lag]
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.lag_coupling(i.abs_diff(j))
    }

    pub fn time(&self, site: usize) -> f64 {
        site as f64 * self.delta()
    }

    /// Site index of a grid time.
    pub fn site_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.delta()).round();
        if !(0.0..=self.n as f64).contains(&k) || (k * self.delta() - t).abs() > 1e-9 * self.delta().max(1.0) {
            return Err(Error::usage(format!(
                "time {t} is not a grid point of spacing {}",
                self.delta()
            )));
        }
        Ok(k as usize)
    }

    /// Edwards–Sokal probability `1 - e^{-2J}` that an aligned pair is open.
    pub fn fk_probability(&self, lag: usize) -> f64 {
        -(-2.0 * self.lag_coupling(lag)).exp_m1()
    }

    /// Edge probability of the dominated independent bond model: `1 - 2δ`
    /// for neighbours, `1 - e^{-2αδ² g}` otherwise.
    pub fn bond_probability(&self, lag: usize) -> Result<f64> {
        if lag == 1 {
            let p = 1.0 - 2.0 * self.delta();
            if p <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "neighbour bond probability 1 - 2δ = {p} is not positive; refine the grid (δ < 1/2)"
                )));
            }
            Ok(p)
        } else {
            Ok(-(-self.lag_coupling(lag)).exp_m1())
        }
    }

    /// `Σ_{i<j} J_ij σ_i σ_j`.
    pub fn energy(&self, spins: &SpinConfig) -> f64 {
        let s = spins.values();
        let mut total = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                total += self.lag_coupling[j - i] * f64::from(s[i] * s[j]);
            }
        }
        total
    }

    pub(crate) fn check_sites(&self, sites: &[usize]) -> Result<()> {
        if let Some(&bad) = sites.iter().find(|&&s| s > self.n) {
            return Err(Error::usage(format!("site {bad} outside 0..={}", self.n)));
        }
        Ok(())
    }
}

/// A configuration `σ ∈ {-1, +1}^{N+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    values: Vec<i8>,
}

impl SpinConfig {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::usage("spins must be +1 or -1"));
        }
        Ok(SpinConfig { values })
    }

    pub fn all_up(sites: usize) -> Self {
        SpinConfig {
            values: vec![1; sites],
        }
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.values[i])
    }

    pub fn flip(&mut self, i: usize) {
        self.values[i] = -self.values[i];
    }

    pub fn product(&self, sites: &[usize]) -> f64 {
        sites.iter().map(|&i| self.get(i)).product()
    }
}

/// Sites whose spin appears an odd number of times in `sites`
/// (`σ² = 1`), sorted.
pub(crate) fn reduce_by_parity(sites: &[usize]) -> Vec<usize> {
    let mut s = sites.to_vec();
    s.sort_unstable();
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(s[i]);
        }
        i = j;
    }
    out
}
