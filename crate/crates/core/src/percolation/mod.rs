//! Continuum percolation on `[0, T]` and the site-bond percolations derived
//! from it.
//!
//! Splitting points `ξ₁` (Poisson, rate 2) cut `[0, T]` into intervals;
//! bonds `ξ₂` (Poisson on `{s < t}` with intensity `2α g(t-s)`) join the
//! intervals containing their endpoints. Two times are connected when their
//! intervals share a cluster, and that event lower-bounds the spin
//! correlation of the continuum Ising model.

mod experiments;
mod site_bond;

pub use experiments::{
    appendix_convergence_experiment, long_range_order_scan, ConvergenceRow, ConvergenceTable,
    LroClass, LroEntry, LroReport, LroSettings, DECAY_THRESHOLD,
};
pub use site_bond::{discrete_two_point, edge_probability, phi_map, Domain, SiteBondModel};

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::SimRng;
use crate::stats::{iid_estimate, iid_estimates, Estimate};
use crate::union_find::UnionFind;

/// At most this many lag bands are used for thinning.
const MAX_BANDS: usize = 64;

/// One realization of the continuum percolation.
#[derive(Clone, Debug)]
pub struct ContinuumPercConfig {
    horizon: f64,
    splits: Vec<f64>,
    bonds: Vec<(f64, f64)>,
    clusters: UnionFind,
}

impl ContinuumPercConfig {
    fn assemble(horizon: f64, splits: Vec<f64>, bonds: Vec<(f64, f64)>) -> Self {
        let mut clusters = UnionFind::new(splits.len() + 1);
        for &(s, t) in &bonds {
            let a = interval_index(&splits, s);
            let b = interval_index(&splits, t);
            clusters.union(a, b);
        }
        ContinuumPercConfig {
            horizon,
            splits,
            bonds,
            clusters,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Sorted splitting points.
    pub fn splits(&self) -> &[f64] {
        &self.splits
    }

    /// Bonds `(s, t)` with `s < t`.
    pub fn bonds(&self) -> &[(f64, f64)] {
        &self.bonds
    }

    pub fn interval_count(&self) -> usize {
        self.splits.len() + 1
    }

    /// Index of the interval containing `x`.
    pub fn interval_of(&self, x: f64) -> usize {
        interval_index(&self.splits, x)
    }

    pub fn connected(&mut self, x: f64, y: f64) -> bool {
        let (a, b) = (self.interval_of(x), self.interval_of(y));
        self.clusters.connected(a, b)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.components()
    }
}

fn interval_index(splits: &[f64], x: f64) -> usize {
    splits.partition_point(|&p| p <= x)
}

/// Lag bands `[ℓ_k, ℓ_{k+1})` on which `g` drops by at most half; the
/// dominating intensity on a band is `2α g(ℓ_k)`.
#[derive(Clone, Debug)]
pub(crate) struct LagBands {
    horizon: f64,
    edges: Vec<f64>,
    bounds: Vec<f64>,
}

impl LagBands {
    pub(crate) fn new(kernel: &Kernel, horizon: f64) -> Result<Self> {
        let g0 = kernel.at_zero();
        if !g0.is_finite() {
            return Err(Error::InvalidModel("g(0) must be finite".into()));
        }
        let mut edges = vec![0.0];
        let mut bounds = vec![g0];
        loop {
            let lo = *edges.last().expect("nonempty");
            let target = 0.5 * kernel.eval(lo)?;
            if edges.len() == MAX_BANDS || kernel.eval(horizon)? >= target {
                edges.push(horizon);
                break;
            }
            let (mut a, mut b) = (lo, horizon);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if kernel.eval(mid)? > target {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            edges.push(b);
            bounds.push(kernel.eval(b)?);
        }
        Ok(LagBands {
            horizon,
            edges,
            bounds,
        })
    }

    /// Area of `{(s, ℓ): ℓ ∈ band, 0 ≤ s ≤ T - ℓ}`.
    fn area(&self, k: usize) -> f64 {
        let (a, b) = (self.edges[k], self.edges[k + 1]);
        let t = self.horizon;
        0.5 * ((t - a).powi(2) - (t - b).powi(2))
    }

    /// Bonds of intensity `2α g(t - s)` by thinning band by band.
    fn sample_bonds(&self, kernel: &Kernel, alpha: f64, rng: &mut SimRng) -> Result<Vec<(f64, f64)>> {
        let mut bonds = Vec::new();
        if alpha == 0.0 {
            return Ok(bonds);
        }
        let t = self.horizon;
        for k in 0..self.bounds.len() {
            let mean = 2.0 * alpha * self.bounds[k] * self.area(k);
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean)
                .map_err(|e| Error::Numerical(format!("bond count: {e}")))?
                .sample(rng) as usize;
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            let (ua, ub) = ((t - a).powi(2), (t - b).powi(2));
            for _ in 0..count {
                // lag density ∝ T - ℓ on the band
                let u: f64 = rng.random();
                let lag = t - (ua - u * (ua - ub)).max(0.0).sqrt();
                let s = (t - lag) * rng.random::<f64>();
                if rng.random::<f64>() * self.bounds[k] <= kernel.eval(lag)? {
                    bonds.push((s, s + lag));
                }
            }
        }
        Ok(bonds)
    }
}

fn sample_splits(horizon: f64, rng: &mut SimRng) -> Vec<f64> {
    let exp = Exp::new(2.0).expect("positive rate");
    let mut splits = Vec::new();
    let mut x = exp.sample(rng);
    while x < horizon {
        splits.push(x);
        x += exp.sample(rng);
    }
    splits
}

fn check_inputs(alpha: f64, horizon: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidModel(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidModel(format!("horizon must be > 0, got {horizon}")));
    }
    Ok(())
}

pub(crate) fn sample_with(
    alpha: f64,
    kernel: &Kernel,
    bands: &LagBands,
    rng: &mut SimRng,
) -> Result<ContinuumPercConfig> {
    let splits = sample_splits(bands.horizon, rng);
    let bonds = bands.sample_bonds(kernel, alpha, rng)?;
    Ok(ContinuumPercConfig::assemble(bands.horizon, splits, bonds))
}

/// One configuration of the continuum percolation on `[0, T]`.
pub fn sample_continuum(alpha: f64, horizon: f64, kernel: &Kernel, seed: u64) -> Result<ContinuumPercConfig> {
    use rand::SeedableRng;
    check_inputs(alpha, horizon)?;
    let bands = LagBands::new(kernel, horizon)?;
    sample_with(alpha, kernel, &bands, &mut SimRng::seed_from_u64(seed))
}

/// `P(x ↔ y)` in the continuum percolation on `[0, T]`.
pub fn continuum_two_point(
    alpha: f64,
    horizon: f64,
    kernel: &Kernel,
    x: f64,
    y: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_inputs(alpha, horizon)?;
    if !(0.0..=horizon).contains(&x) || !(0.0..=horizon).contains(&y) {
        return Err(Error::usage(format!("points must lie in [0, {horizon}]")));
    }
    if x == y {
        return Ok(Estimate::exact(1.0, n_samples, seed));
    }
    let bands = LagBands::new(kernel, horizon)?;
    iid_estimate(n_samples, seed, |rng| {
        let mut c = sample_with(alpha, kernel, &bands, rng)?;
        Ok(if c.connected(x, y) { 1.0 } else { 0.0 })
    })
}

/// Probability that the unit interval `[0, 1]` is alive: all of its
/// sub-intervals are joined by bonds with both ends inside `[0, 1]`.
pub fn estimate_p0(alpha: f64, kernel: &Kernel, n_samples: usize, seed: u64) -> Result<Estimate> {
    let mut v = estimate_p0_scan(&[alpha], kernel, n_samples, seed)?;
    Ok(v.remove(0))
}

/// [`estimate_p0`] along a list of couplings with common random numbers:
/// bonds are drawn once at the largest coupling and each keeps a uniform mark;
/// at coupling `α` only bonds with mark `≤ α/α_max` are present. The
/// estimates are therefore monotone in `α` sample by sample.
pub fn estimate_p0_scan(alphas: &[f64], kernel: &Kernel, n_samples: usize, seed: u64) -> Result<Vec<Estimate>> {
    for &a in alphas {
        check_inputs(a, 1.0)?;
    }
    let alpha_max = alphas.iter().cloned().fold(0.0, f64::max);
    let bands = LagBands::new(kernel, 1.0)?;
    iid_estimates(n_samples, seed, alphas.len(), |rng, out| {
        let splits = sample_splits(1.0, rng);
        let bonds = bands.sample_bonds(kernel, alpha_max, rng)?;
        let marks: Vec<f64> = bonds.iter().map(|_| rng.random::<f64>()).collect();
        for (o, &a) in out.iter_mut().zip(alphas) {
            let kept: Vec<(f64, f64)> = bonds
                .iter()
                .zip(&marks)
                .filter(|(_, &m)| alpha_max > 0.0 && m * alpha_max <= a)
                .map(|(b, _)| *b)
                .collect();
            let c = ContinuumPercConfig::assemble(1.0, splits.clone(), kept);
            *o = if c.cluster_count() == 1 { 1.0 } else { 0.0 };
        }
        Ok(())
    })
}

/// Summary of a batch of configurations, for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCounts {
    pub splits: Estimate,
    pub bonds: Estimate,
}

/// Mean numbers of splitting points and bonds.
pub fn point_counts(alpha: f64, horizon: f64, kernel: &Kernel, n_samples: usize, seed: u64) -> Result<PointCounts> {
    check_inputs(alpha, horizon)?;
    let bands = LagBands::new(kernel, horizon)?;
    let mut v = iid_estimates(n_samples, seed, 2, |rng, out| {
        let c = sample_with(alpha, kernel, &bands, rng)?;
        out[0] = c.splits.len() as f64;
        out[1] = c.bonds.len() as f64;
        Ok(())
    })?;
    let bonds = v.pop().expect("two observables");
    let splits = v.pop().expect("two observables");
    Ok(PointCounts { splits, bonds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bands_halve_and_cover() {
        let k = Kernel::poly(1.0).unwrap();
        let b = LagBands::new(&k, 50.0).unwrap();
        assert_eq!(b.edges[0], 0.0);
        assert_eq!(*b.edges.last().unwrap(), 50.0);
        for i in 0..b.bounds.len() {
            assert!((k.eval(b.edges[i]).unwrap() - b.bounds[i]).abs() < 1e-12);
            if i + 2 < b.edges.len() {
                let ratio = k.eval(b.edges[i + 1]).unwrap() / b.bounds[i];
                assert!((ratio - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn intervals_index_by_splits() {
        let c = ContinuumPercConfig::assemble(3.0, vec![1.0, 2.0], vec![(0.5, 2.5)]);
        assert_eq!(c.interval_of(0.0), 0);
        assert_eq!(c.interval_of(1.0), 1);
        assert_eq!(c.interval_of(2.9), 2);
        let mut c = c;
        assert!(c.connected(0.2, 2.2));
        assert!(!c.connected(0.2, 1.5));
        assert_eq!(c.cluster_count(), 2);
    }

    #[test]
    fn no_bonds_without_coupling() {
        let c = sample_continuum(0.0, 10.0, &Kernel::poly(1.0).unwrap(), 1).unwrap();
        assert!(c.bonds().is_empty());
    }

    #[test]
    fn crn_scan_is_monotone_per_sample() {
        let k = Kernel::poly(1.0).unwrap();
        let v = estimate_p0_scan(&[0.0, 1.0, 4.0, 16.0], &k, 3200, 2).unwrap();
        assert!(v.windows(2).all(|w| w[0].mean <= w[1].mean));
    }
}
