use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::fk::fk_from_spins_with;
use super::{reduce_by_parity, LatticeModel, SpinConfig};
use crate::error::Result;
use crate::rng::{stream_seed, with_worker_cap, SimRng};
use crate::stats::{Estimate, RunSettings};

/// Runs independent chains built by `make`, one sweep at a time, recording
/// `measure` after burn-in.
fn run<C, M, S, F>(settings: &RunSettings, make: M, sweep: S, measure: F) -> Result<Estimate>
where
    M: Fn(u64) -> C + Sync,
    S: Fn(&mut C) + Sync,
    F: Fn(&mut C) -> f64 + Sync,
{
    settings.validate()?;
    let series: Vec<Vec<f64>> = with_worker_cap(|| {
        (0..settings.chains)
            .into_par_iter()
            .map(|c| {
                let mut chain = make(stream_seed(settings.seed, c as u64));
                let mut out = Vec::with_capacity(settings.recorded());
                for s in 0..settings.n_sweeps {
                    sweep(&mut chain);
                    if s >= settings.burn_in {
                        out.push(measure(&mut chain));
                    }
                }
                out
            })
            .collect()
    });
    Estimate::pooled(&series, settings.seed)
}

struct SiteChain {
    spins: SpinConfig,
    rng: SimRng,
}

/// `E[∏ σ_i]` by single-site Metropolis; one sweep is `N + 1` proposals at
/// uniformly random sites, each costing O(N).
pub fn mcmc_correlation(model: &LatticeModel, sites: &[usize], settings: &RunSettings) -> Result<Estimate> {
    model.check_sites(sites)?;
    let sites = reduce_by_parity(sites);
    let n = model.sites();
    run(
        settings,
        |seed| SiteChain {
            spins: SpinConfig::all_up(n),
            rng: SimRng::seed_from_u64(seed),
        },
        |c| {
            for _ in 0..n {
                let i = c.rng.random_range(0..n);
                let s = c.spins.get(i);
                let field: f64 = (0..n).map(|j| model.coupling(i, j) * c.spins.get(j)).sum();
                let log_ratio = -2.0 * s * field;
                if log_ratio >= 0.0 || c.rng.random::<f64>() < log_ratio.exp() {
                    c.spins.flip(i);
                }
            }
        },
        |c| c.spins.product(&sites),
    )
}

/// Metropolis chain on domain walls.
///
/// A wall on bond `b` means `σ_{b+1} = -σ_b`. The neighbour coupling turns
/// into a factor `δ` per wall, so birth/death moves with the proposal
/// counting factors mix well even when `δ` is small and single spin flips
/// almost never succeed. The long-range part of the energy change is read
/// off a 2D prefix sum of the long-range couplings.
#[derive(Clone, Debug)]
pub struct WallChain<'a> {
    model: &'a LatticeModel,
    first: f64,
    walls: Vec<usize>,
    prefix: Vec<f64>,
    rng: SimRng,
}

impl<'a> WallChain<'a> {
    pub fn new(model: &'a LatticeModel, seed: u64) -> Self {
        let n = model.sites();
        let w = n + 1;
        let mut prefix = vec![0.0; w * w];
        for i in 0..n {
            for j in 0..n {
                let lr = if i.abs_diff(j) >= 2 { model.coupling(i, j) } else { 0.0 };
                prefix[(i + 1) * w + j + 1] =
                    lr + prefix[i * w + j + 1] + prefix[(i + 1) * w + j] - prefix[i * w + j];
            }
        }
        WallChain {
            model,
            first: 1.0,
            walls: Vec::new(),
            prefix,
            rng: SimRng::seed_from_u64(seed),
        }
    }

    pub fn walls(&self) -> &[usize] {
        &self.walls
    }

    pub fn spins(&self) -> SpinConfig {
        let n = self.model.sites();
        let mut v = Vec::with_capacity(n);
        let mut s = if self.first > 0.0 { 1i8 } else { -1 };
        let mut next = self.walls.iter().peekable();
        for i in 0..n {
            v.push(s);
            if next.peek() == Some(&&i) {
                next.next();
                s = -s;
            }
        }
        SpinConfig::new(v).expect("spins are ±1")
    }

    pub fn spin(&self, site: usize) -> f64 {
        let crossed = self.walls.partition_point(|&b| b < site);
        if crossed % 2 == 0 {
            self.first
        } else {
            -self.first
        }
    }

    /// Long-range coupling summed over `[a1, b1) × [a2, b2)`.
    fn rect(&self, a1: usize, b1: usize, a2: usize, b2: usize) -> f64 {
        let w = self.model.sites() + 1;
        let p = &self.prefix;
        p[b1 * w + b2] - p[a1 * w + b2] - p[b1 * w + a2] + p[a1 * w + a2]
    }

    /// Long-range energy change when the spins of sites `[lo, hi)` flip,
    /// with `walls` the block structure to use (a superset of the current
    /// walls that has boundaries at `lo` and `hi`).
    fn flip_delta(&self, walls: &[usize], lo: usize, hi: usize) -> f64 {
        let n = self.model.sites();
        let mut bounds = Vec::with_capacity(walls.len() + 2);
        bounds.push(0);
        bounds.extend(walls.iter().map(|b| b + 1));
        bounds.push(n);
        let mut blocks = Vec::with_capacity(bounds.len() - 1);
        for w in bounds.windows(2) {
            blocks.push((w[0], w[1], self.spin(w[0])));
        }
        let mut cross = 0.0;
        for &(a, b, s) in blocks.iter().filter(|blk| blk.0 >= lo && blk.1 <= hi) {
            for &(c, d, r) in blocks.iter().filter(|blk| blk.1 <= lo || blk.0 >= hi) {
                cross += s * r * self.rect(a, b, c, d);
            }
        }
        -2.0 * cross
    }

    /// Flip either the head `[0, b+1)` or the tail `[b+1, N+1)`, whichever
    /// spans fewer walls; the energy is flip invariant so both agree.
    fn split_delta(&self, walls: &[usize], bond: usize) -> f64 {
        let i = walls.partition_point(|&w| w < bond);
        if i <= walls.len() - i {
            self.flip_delta(walls, 0, bond + 1)
        } else {
            self.flip_delta(walls, bond + 1, self.model.sites())
        }
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp()
    }

    fn free_bond(&mut self) -> Option<usize> {
        let bonds = self.model.intervals();
        if self.walls.len() >= bonds {
            return None;
        }
        loop {
            let b = self.rng.random_range(0..bonds);
            if self.walls.binary_search(&b).is_err() {
                return Some(b);
            }
        }
    }

    /// One proposal: birth, death, relocation or global flip.
    pub fn step(&mut self) {
        let bonds = self.model.intervals() as f64;
        let delta = self.model.delta();
        let k = self.walls.len();
        let u: f64 = self.rng.random();
        if u < 0.35 {
            let Some(b) = self.free_bond() else { return };
            let pos = self.walls.partition_point(|&w| w < b);
            let mut trial = self.walls.clone();
            trial.insert(pos, b);
            let de = self.split_delta(&trial, b);
            let log_ratio = de + delta.ln() + ((bonds - k as f64) / (k as f64 + 1.0)).ln();
            if self.accept(log_ratio) {
                self.walls = trial;
            }
        } else if u < 0.7 {
            if k == 0 {
                return;
            }
            let i = self.rng.random_range(0..k);
            let b = self.walls[i];
            let de = self.split_delta(&self.walls, b);
            let log_ratio = de - delta.ln() + (k as f64 / (bonds - k as f64 + 1.0)).ln();
            if self.accept(log_ratio) {
                self.walls.remove(i);
            }
        } else if u < 0.9 {
            if k == 0 {
                return;
            }
            let i = self.rng.random_range(0..k);
            let Some(to) = self.free_bond() else { return };
            let from = self.walls[i];
            let mut trial = self.walls.clone();
            let pos = trial.partition_point(|&w| w < to);
            trial.insert(pos, to);
            let (lo, hi) = (from.min(to) + 1, from.max(to) + 1);
            let de = self.flip_delta(&trial, lo, hi);
            if self.accept(de) {
                trial.retain(|&w| w != from);
                self.walls = trial;
            }
        } else {
            self.first = -self.first;
        }
    }

    /// `N + 1` proposals.
    pub fn sweep(&mut self) {
        for _ in 0..self.model.sites() {
            self.step();
        }
    }
}

/// `E[∏ σ_i]` from the domain-wall chain.
pub fn wall_correlation(model: &LatticeModel, sites: &[usize], settings: &RunSettings) -> Result<Estimate> {
    model.check_sites(sites)?;
    let sites = reduce_by_parity(sites);
    run(
        settings,
        |seed| WallChain::new(model, seed),
        WallChain::sweep,
        |c| sites.iter().map(|&s| c.spin(s)).product(),
    )
}

/// `P(a ↔ b)` in the FK representation: spins from the domain-wall chain,
/// then one Edwards–Sokal edge draw per recorded sweep.
pub fn fk_two_point_mcmc(model: &LatticeModel, a: usize, b: usize, settings: &RunSettings) -> Result<Estimate> {
    model.check_sites(&[a, b])?;
    run(
        settings,
        |seed| WallChain::new(model, seed),
        WallChain::sweep,
        |c| {
            let spins = c.spins();
            let mut fk = fk_from_spins_with(model, &spins, &mut c.rng);
            if fk.connected(a, b) {
                1.0
            } else {
                0.0
            }
        },
    )
}
