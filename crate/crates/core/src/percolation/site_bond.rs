use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelResult};
use crate::rng::geometric_gap;
use crate::stats::{iid_estimate, Estimate};
use crate::union_find::UnionFind;

/// `1 - exp(-2α ∫_n^{n+1} ∫_m^{m+1} g(t-s))` for `|n - m| = lag ≥ 1`.
pub fn edge_probability(alpha: f64, kernel: &Kernel, lag: u64) -> KernelResult<f64> {
    if lag == 0 || alpha == 0.0 {
        return Ok(0.0);
    }
    let k = lag as f64;
    let w = kernel.double_integral(0.0, 1.0, k, k + 1.0)?;
    Ok(-(-2.0 * alpha * w).exp_m1())
}

/// The bijection `ℕ → ℤ`: `n/2` for even `n`, `-(n+1)/2` for odd `n`.
pub fn phi_map(n: i64) -> Result<i64> {
    if n < 0 {
        return Err(Error::usage(format!("phi_map needs n >= 0, got {n}")));
    }
    Ok(if n % 2 == 0 { n / 2 } else { -(n + 1) / 2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// `{0, .., L}`.
    Natural,
    /// `{-L, .., L}`.
    Integers,
}

/// Site-bond percolation on a truncated `ℕ` or `ℤ`: each site is alive with
/// probability `p₀`, each edge `{n, m}` open with probability `p_{n,m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteBondModel {
    domain: Domain,
    truncation: u64,
    alpha: f64,
    p0: f64,
    /// Edge probability by lag; index 0 unused.
    lag_probability: Vec<f64>,
}

impl SiteBondModel {
    pub fn new(domain: Domain, truncation: u64, alpha: f64, kernel: &Kernel, p0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::InvalidModel(format!("p0 must lie in [0, 1], got {p0}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidModel(format!("alpha must be >= 0, got {alpha}")));
        }
        if truncation == 0 {
            return Err(Error::InvalidModel("truncation must be >= 1".into()));
        }
        let max_lag = match domain {
            Domain::Natural => truncation,
            Domain::Integers => 2 * truncation,
        };
        let lag_probability = (0..=max_lag)
            .map(|lag| edge_probability(alpha, kernel, lag))
            .collect::<KernelResult<Vec<f64>>>()?;
        Ok(SiteBondModel {
            domain,
            truncation,
            alpha,
            p0,
            lag_probability,
        })
    }

    /// Same model with every edge longer than one step removed.
    pub fn nearest_neighbour_only(mut self) -> Self {
        for p in self.lag_probability.iter_mut().skip(2) {
            *p = 0.0;
        }
        self
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn edge_probability(&self, n: i64, m: i64) -> f64 {
        let lag = n.abs_diff(m) as usize;
        self.lag_probability.get(lag).copied().unwrap_or(0.0)
    }

    fn lowest(&self) -> i64 {
        match self.domain {
            Domain::Natural => 0,
            Domain::Integers => -(self.truncation as i64),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.lag_probability.len()
    }

    fn index(&self, n: i64) -> Result<usize> {
        let i = n - self.lowest();
        if i < 0 || i as usize >= self.vertex_count() {
            return Err(Error::usage(format!("vertex {n} outside the truncated domain")));
        }
        Ok(i as usize)
    }
}

/// `P(a ↔ b)` through open edges whose vertices are all alive.
pub fn discrete_two_point(model: &SiteBondModel, a: i64, b: i64, n_samples: usize, seed: u64) -> Result<Estimate> {
    let (ia, ib) = (model.index(a)?, model.index(b)?);
    let n = model.vertex_count();
    iid_estimate(n_samples, seed, |rng| {
        let alive: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < model.p0).collect();
        if !(alive[ia] && alive[ib]) {
            return Ok(0.0);
        }
        let mut uf = UnionFind::new(n);
        for lag in 1..n {
            let p = model.lag_probability[lag];
            if p <= 0.0 {
                continue;
            }
            let pairs = (n - lag) as u64;
            let mut i = geometric_gap(rng, p);
            while i < pairs {
                let (u, v) = (i as usize, i as usize + lag);
                if alive[u] && alive[v] {
                    uf.union(u, v);
                }
                i = i.saturating_add(1).saturating_add(geometric_gap(rng, p));
            }
        }
        Ok(if uf.connected(ia, ib) { 1.0 } else { 0.0 })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_values_and_bijection() {
        assert_eq!(phi_map(0).unwrap(), 0);
        assert_eq!(phi_map(5).unwrap(), -3);
        assert!(phi_map(-1).is_err());
        let l = 25;
        let mut seen: Vec<i64> = (0..=2 * l).map(|n| phi_map(n).unwrap()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (-l..=l).collect::<Vec<_>>());
    }

    #[test]
    fn edge_probability_uses_unit_boxes() {
        let k = Kernel::single_mode(1.0, 1.0).unwrap();
        // ∫_0^1∫_2^3 e^{-(t-s)} = e^{-1}(1 - e^{-1})²
        let w = (-1.0f64).exp() * (1.0 - (-1.0f64).exp()).powi(2);
        let p = edge_probability(0.5, &k, 2).unwrap();
        assert!((p - (1.0 - (-w).exp())).abs() < 1e-14);
    }

    #[test]
    fn nearest_neighbour_chain() {
        let k = Kernel::poly(1.0).unwrap();
        let m = SiteBondModel::new(Domain::Natural, 12, 1.0, &k, 1.0).unwrap().nearest_neighbour_only();
        let p = m.edge_probability(0, 1);
        let e = discrete_two_point(&m, 0, 3, 64_000, 8).unwrap();
        assert!((e.mean - p.powi(3)).abs() < 4.0 * e.stderr + 1e-12, "{e:?} vs {}", p.powi(3));
    }

    #[test]
    fn translation_invariance() {
        let k = Kernel::poly(1.0).unwrap();
        let m = SiteBondModel::new(Domain::Integers, 5, 1.0, &k, 0.5).unwrap();
        assert_eq!(m.edge_probability(-3, 1), m.edge_probability(0, 4));
        assert!(m.edge_probability(0, 1) > m.edge_probability(0, 2));
    }
}
