use rand::{Rng, SeedableRng};

use super::{LatticeModel, SpinConfig};
use crate::error::Result;
use crate::rng::{geometric_gap, SimRng};
use crate::stats::{iid_estimate, Estimate};
use crate::union_find::UnionFind;

/// An edge configuration on the complete graph over the grid sites.
#[derive(Clone, Debug)]
pub struct FKConfig {
    open: Vec<(usize, usize)>,
    clusters: UnionFind,
}

impl FKConfig {
    pub fn open_edges(&self) -> &[(usize, usize)] {
        &self.open
    }

    pub fn connected(&mut self, a: usize, b: usize) -> bool {
        self.clusters.connected(a, b)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.components()
    }
}

/// Visits the pairs `(i, i + lag)` that succeed independently with
/// probability `p`, skipping geometrically between successes.
fn for_each_success<R: Rng, F: FnMut(usize, usize)>(rng: &mut R, sites: usize, lag: usize, p: f64, mut f: F) {
    if lag >= sites || p <= 0.0 {
        return;
    }
    let pairs = (sites - lag) as u64;
    let mut i = geometric_gap(rng, p);
    while i < pairs {
        f(i as usize, i as usize + lag);
        i = i.saturating_add(1).saturating_add(geometric_gap(rng, p));
    }
}

pub(crate) fn fk_from_spins_with<R: Rng>(model: &LatticeModel, spins: &SpinConfig, rng: &mut R) -> FKConfig {
    let n = model.sites();
    let mut open = Vec::new();
    let mut clusters = UnionFind::new(n);
    for lag in 1..n {
        for_each_success(rng, n, lag, model.fk_probability(lag), |i, j| {
            if spins.get(i) == spins.get(j) {
                open.push((i, j));
                clusters.union(i, j);
            }
        });
    }
    FKConfig { open, clusters }
}

/// Edwards–Sokal step: each aligned pair opens independently with
/// probability `1 - e^{-2J}`, anti-aligned pairs stay closed.
pub fn fk_from_spins(model: &LatticeModel, spins: &SpinConfig, seed: u64) -> FKConfig {
    fk_from_spins_with(model, spins, &mut SimRng::seed_from_u64(seed))
}

/// `P(a ↔ b)` in independent bond percolation with probabilities
/// [`LatticeModel::bond_probability`].
pub fn bond_percolation_two_point(
    model: &LatticeModel,
    a: usize,
    b: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    model.check_sites(&[a, b])?;
    let n = model.sites();
    let probs: Vec<f64> = (0..n)
        .map(|lag| if lag == 0 { Ok(0.0) } else { model.bond_probability(lag) })
        .collect::<Result<_>>()?;
    if a == b {
        return Ok(Estimate::exact(1.0, n_samples, seed));
    }
    iid_estimate(n_samples, seed, |rng| {
        let mut uf = UnionFind::new(n);
        for (lag, &p) in probs.iter().enumerate().skip(1) {
            for_each_success(rng, n, lag, p, |i, j| {
                uf.union(i, j);
            });
        }
        Ok(if uf.connected(a, b) { 1.0 } else { 0.0 })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;

    #[test]
    fn anti_aligned_pairs_stay_closed() {
        let m = LatticeModel::new(1.0, 6, 2.0, Kernel::poly(1.0).unwrap()).unwrap();
        let spins = SpinConfig::new(vec![1, -1, 1, -1, 1, -1, 1]).unwrap();
        let fk = fk_from_spins(&m, &spins, 3);
        for &(i, j) in fk.open_edges() {
            assert_eq!(spins.get(i), spins.get(j));
        }
    }

    #[test]
    fn free_model_opens_only_neighbours() {
        let m = LatticeModel::new(1.0, 10, 0.0, Kernel::poly(1.0).unwrap()).unwrap();
        let spins = SpinConfig::all_up(11);
        let mut opened = 0;
        for seed in 0..2000 {
            let fk = fk_from_spins(&m, &spins, seed);
            assert!(fk.open_edges().iter().all(|&(i, j)| j - i == 1));
            opened += fk.open_edges().len();
        }
        // neighbours open with probability 1 - δ = 0.9
        let rate = opened as f64 / (2000.0 * 10.0);
        assert!((rate - 0.9).abs() < 0.01, "{rate}");
    }

    #[test]
    fn free_bond_percolation_is_a_product() {
        let m = LatticeModel::new(1.0, 4, 0.0, Kernel::poly(1.0).unwrap()).unwrap();
        let e = bond_percolation_two_point(&m, 0, 3, 64_000, 5).unwrap();
        assert!((e.mean - 0.125).abs() < 4.0 * e.stderr, "{e:?}");
    }
}
