use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::path::{jump_form, path_interaction, Spin, SpinPath};
use super::{IsingParams, MoveMix};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelResult};
use crate::rng::SimRng;

/// Steps between full recomputations of the cached interaction.
pub const DRIFT_CHECK_INTERVAL: u64 = 10_000;
const DRIFT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Insert,
    Delete,
    Relocate,
    Flip,
    PairInsert,
    PairDelete,
}

impl MoveKind {
    const ALL: [MoveKind; 6] = [
        MoveKind::Insert,
        MoveKind::Delete,
        MoveKind::Relocate,
        MoveKind::Flip,
        MoveKind::PairInsert,
        MoveKind::PairDelete,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: [u64; 6],
    pub accepted: [u64; 6],
}

impl MoveStats {
    pub fn acceptance_rate(&self, kind: MoveKind) -> f64 {
        let p = self.proposed[kind.index()];
        if p == 0 {
            0.0
        } else {
            self.accepted[kind.index()] as f64 / p as f64
        }
    }

    pub fn merge(&mut self, other: &MoveStats) {
        for i in 0..MoveKind::ALL.len() {
            self.proposed[i] += other.proposed[i];
            self.accepted[i] += other.accepted[i];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
}

/// A Markov chain on spin paths targeting the continuum Ising measure.
#[derive(Clone, Debug)]
pub struct ChainState {
    path: SpinPath,
    mix: MoveMix,
    /// Cached `Φ(path)`; `None` while the chain runs at `α = 0`.
    interaction: Option<f64>,
    /// Rate of the exponential width of proposed excursions.
    pair_rate: f64,
    rng: SimRng,
    stats: MoveStats,
    steps: u64,
}

/// Proposals per sweep: about twice the expected jump count of the free walk.
pub fn steps_per_sweep(horizon: f64) -> usize {
    (2.0 * horizon).ceil() as usize + 2
}

impl ChainState {
    /// Starts from a constant path: `+1` when conditioned, random otherwise.
    pub fn new(params: &IsingParams, seed: u64) -> Result<Self> {
        let mut rng = SimRng::seed_from_u64(seed);
        let initial = if params.condition_start || rng.random::<bool>() {
            Spin::Up
        } else {
            Spin::Down
        };
        let path = SpinPath::constant(params.horizon, initial)?;
        Self::assemble(path, params, rng)
    }

    pub fn from_path(path: SpinPath, params: &IsingParams, seed: u64) -> Result<Self> {
        if path.horizon() != params.horizon {
            return Err(Error::usage("path horizon does not match the model"));
        }
        if params.condition_start && path.initial() != Spin::Up {
            return Err(Error::usage("conditioned chains must start with X_0 = +1"));
        }
        Self::assemble(path, params, SimRng::seed_from_u64(seed))
    }

    fn assemble(path: SpinPath, params: &IsingParams, rng: SimRng) -> Result<Self> {
        let mix = if params.condition_start {
            MoveMix::default().without_flip()
        } else {
            MoveMix::default()
        };
        let interaction = if params.alpha > 0.0 {
            Some(path_interaction(&path, &params.kernel)?)
        } else {
            None
        };
        // excursions of width w cost about 4αw ∫_0^T g
        let pair_rate = 1.0 + 4.0 * params.alpha * params.kernel.first_antideriv(params.horizon)?;
        Ok(ChainState {
            path,
            mix,
            interaction,
            pair_rate,
            rng,
            stats: MoveStats::default(),
            steps: 0,
        })
    }

    pub fn path(&self) -> &SpinPath {
        &self.path
    }

    pub fn stats(&self) -> &MoveStats {
        &self.stats
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rng_mut(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// `α Φ` of the current path.
    pub fn energy(&self, params: &IsingParams) -> Result<f64> {
        if params.alpha == 0.0 {
            return Ok(0.0);
        }
        match self.interaction {
            Some(phi) => Ok(params.alpha * phi),
            None => Ok(params.alpha * path_interaction(&self.path, &params.kernel)?),
        }
    }

    fn choose_move(&mut self) -> MoveKind {
        let u: f64 = self.rng.random();
        let m = &self.mix;
        let mut acc = 0.0;
        for (kind, w) in MoveKind::ALL
            .into_iter()
            .zip([m.insert, m.delete, m.relocate, m.flip, m.pair_insert, m.pair_delete])
        {
            acc += w;
            if u < acc {
                return kind;
            }
        }
        // u within rounding of 1
        if m.flip > 0.0 {
            MoveKind::Flip
        } else {
            MoveKind::Relocate
        }
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp()
    }

    /// One Metropolis–Hastings step.
    pub fn step(&mut self, params: &IsingParams) -> Result<StepOutcome> {
        let tracking = params.alpha > 0.0;
        if tracking && self.interaction.is_none() {
            self.interaction = Some(path_interaction(&self.path, &params.kernel)?);
        } else if !tracking {
            self.interaction = None;
        }
        let kind = self.choose_move();
        self.stats.proposed[kind.index()] += 1;
        let t = params.horizon;
        let k = self.path.num_jumps();
        let accepted = match kind {
            MoveKind::Insert => {
                let u = t * self.rng.random::<f64>();
                let i = self.path.jumps().partition_point(|&x| x < u);
                let collides = u <= 0.0 || self.path.jumps().get(i) == Some(&u);
                if collides {
                    false
                } else {
                    let d_phi = if tracking {
                        insert_delta(&self.path, &params.kernel, u)?
                    } else {
                        0.0
                    };
                    let log_ratio = params.alpha * d_phi + (t / (k + 1) as f64).ln();
                    let ok = self.accept(log_ratio);
                    if ok {
                        self.path.insert_jump(u);
                        self.bump(d_phi);
                    }
                    ok
                }
            }
            MoveKind::Delete => {
                if k == 0 {
                    false
                } else {
                    let j = self.rng.random_range(0..k);
                    let d_phi = if tracking {
                        delete_delta(&self.path, &params.kernel, j)?
                    } else {
                        0.0
                    };
                    let log_ratio = params.alpha * d_phi + (k as f64 / t).ln();
                    let ok = self.accept(log_ratio);
                    if ok {
                        self.path.remove_jump(j);
                        self.bump(d_phi);
                    }
                    ok
                }
            }
            MoveKind::Relocate => {
                if k == 0 {
                    false
                } else {
                    let j = self.rng.random_range(0..k);
                    let jumps = self.path.jumps();
                    let lo = if j == 0 { 0.0 } else { jumps[j - 1] };
                    let hi = if j + 1 == k { t } else { jumps[j + 1] };
                    let u = lo + (hi - lo) * self.rng.random::<f64>();
                    if u <= lo || u >= hi || u == jumps[j] {
                        false
                    } else {
                        let d_phi = if tracking {
                            relocate_delta(&self.path, &params.kernel, j, u)?
                        } else {
                            0.0
                        };
                        let ok = self.accept(params.alpha * d_phi);
                        if ok {
                            self.path.move_jump(j, u);
                            self.bump(d_phi);
                        }
                        ok
                    }
                }
            }
            MoveKind::Flip => {
                self.path.flip_initial();
                true
            }
            MoveKind::PairInsert => {
                let r = self.pair_rate;
                let a = t * self.rng.random::<f64>();
                let w = -(1.0 - self.rng.random::<f64>()).ln() / r;
                let b = a + w;
                let jumps = self.path.jumps();
                let i = jumps.partition_point(|&x| x < a);
                let clear = a > 0.0 && w > 0.0 && b < t && jumps.get(i).is_none_or(|&x| x > b);
                if !clear {
                    false
                } else {
                    let d_phi = if tracking {
                        pair_insert_delta(&self.path, &params.kernel, a, b)?
                    } else {
                        0.0
                    };
                    // reverse move picks one of the k + 1 adjacent pairs
                    let log_ratio = params.alpha * d_phi + (t / r).ln() + r * w - ((k + 1) as f64).ln();
                    let ok = self.accept(log_ratio);
                    if ok {
                        self.path.insert_jump(a);
                        self.path.insert_jump(b);
                        self.bump(d_phi);
                    }
                    ok
                }
            }
            MoveKind::PairDelete => {
                if k < 2 {
                    false
                } else {
                    let r = self.pair_rate;
                    let j = self.rng.random_range(0..k - 1);
                    let w = self.path.jumps()[j + 1] - self.path.jumps()[j];
                    let d_phi = if tracking {
                        pair_delete_delta(&self.path, &params.kernel, j)?
                    } else {
                        0.0
                    };
                    let log_ratio = params.alpha * d_phi - (t / r).ln() - r * w + ((k - 1) as f64).ln();
                    let ok = self.accept(log_ratio);
                    if ok {
                        self.path.remove_jump(j + 1);
                        self.path.remove_jump(j);
                        self.bump(d_phi);
                    }
                    ok
                }
            }
        };
        if accepted {
            self.stats.accepted[kind.index()] += 1;
        }
        self.steps += 1;
        if tracking && self.steps % DRIFT_CHECK_INTERVAL == 0 {
            self.check_drift(&params.kernel)?;
        }
        Ok(StepOutcome { kind, accepted })
    }

    /// [`steps_per_sweep`] steps.
    pub fn sweep(&mut self, params: &IsingParams) -> Result<()> {
        for _ in 0..steps_per_sweep(params.horizon) {
            self.step(params)?;
        }
        Ok(())
    }

    fn bump(&mut self, d_phi: f64) {
        if let Some(phi) = self.interaction.as_mut() {
            *phi += d_phi;
        }
    }

    /// Recomputes `Φ` from scratch and fails if the running value drifted.
    pub fn check_drift(&mut self, kernel: &Kernel) -> Result<()> {
        let Some(cached) = self.interaction else {
            return Ok(());
        };
        let fresh = path_interaction(&self.path, kernel)?;
        let tol = DRIFT_TOL * fresh.abs().max(1.0);
        self.interaction = Some(fresh);
        if (cached - fresh).abs() > tol {
            return Err(Error::Numerical(format!(
                "interaction drifted: cached {cached:e}, recomputed {fresh:e}"
            )));
        }
        Ok(())
    }
}

/// `mcmc_step(state, params)`: one Metropolis–Hastings update.
pub fn mcmc_step(state: &mut ChainState, params: &IsingParams) -> Result<StepOutcome> {
    state.step(params)
}

/// Change of `Φ` when `X` is negated on `[points[ip], points[iq])`, where
/// `points`/`coeffs` is the jump measure (zero coefficients allowed).
fn flip_delta(
    kernel: &Kernel,
    points: &[f64],
    coeffs: &[f64],
    ip: usize,
    iq: usize,
) -> KernelResult<f64> {
    // right limits X(x+) are running sums of the jump measure
    let right = |i: usize| coeffs[..=i].iter().sum::<f64>();
    let mut delta = vec![0.0; iq - ip + 1];
    delta[0] = -2.0 * right(ip);
    for i in ip + 1..iq {
        delta[i - ip] = -2.0 * coeffs[i];
    }
    delta[iq - ip] = 2.0 * right(iq - 1);
    let mut sum: Vec<f64> = coeffs.iter().map(|c| 2.0 * c).collect();
    for (i, d) in delta.iter().enumerate() {
        sum[ip + i] += d;
    }
    jump_form(kernel, &points[ip..=iq], &delta, points, &sum)
}

/// Flips `[points[i], T)` or `[0, points[i])`, whichever covers fewer
/// breakpoints. Both give the same change since `Φ` is flip invariant.
fn split_delta(kernel: &Kernel, points: &[f64], coeffs: &[f64], i: usize) -> KernelResult<f64> {
    let last = points.len() - 1;
    if i <= last - i {
        flip_delta(kernel, points, coeffs, 0, i)
    } else {
        flip_delta(kernel, points, coeffs, i, last)
    }
}

fn insert_delta(path: &SpinPath, kernel: &Kernel, u: f64) -> KernelResult<f64> {
    let (mut points, mut coeffs) = path.jump_measure();
    let i = points.partition_point(|&x| x < u);
    points.insert(i, u);
    coeffs.insert(i, 0.0);
    split_delta(kernel, &points, &coeffs, i)
}

fn delete_delta(path: &SpinPath, kernel: &Kernel, j: usize) -> KernelResult<f64> {
    let (points, coeffs) = path.jump_measure();
    split_delta(kernel, &points, &coeffs, j + 1)
}

fn relocate_delta(path: &SpinPath, kernel: &Kernel, j: usize, u: f64) -> KernelResult<f64> {
    let (mut points, mut coeffs) = path.jump_measure();
    let old = j + 1;
    if u > points[old] {
        points.insert(old + 1, u);
        coeffs.insert(old + 1, 0.0);
        flip_delta(kernel, &points, &coeffs, old, old + 1)
    } else {
        points.insert(old, u);
        coeffs.insert(old, 0.0);
        flip_delta(kernel, &points, &coeffs, old, old + 1)
    }
}

/// Change of `Φ` when `X` is negated on `[a, b)`, which holds no jump.
fn pair_insert_delta(path: &SpinPath, kernel: &Kernel, a: f64, b: f64) -> KernelResult<f64> {
    let (mut points, mut coeffs) = path.jump_measure();
    let i = points.partition_point(|&x| x < a);
    points.splice(i..i, [a, b]);
    coeffs.splice(i..i, [0.0, 0.0]);
    flip_delta(kernel, &points, &coeffs, i, i + 1)
}

/// Change of `Φ` when jumps `j` and `j + 1` are removed.
fn pair_delete_delta(path: &SpinPath, kernel: &Kernel, j: usize) -> KernelResult<f64> {
    let (points, coeffs) = path.jump_measure();
    flip_delta(kernel, &points, &coeffs, j + 1, j + 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_path(rng: &mut SimRng, horizon: f64, max_jumps: usize) -> SpinPath {
        let k = rng.random_range(0..=max_jumps);
        let mut jumps: Vec<f64> = (0..k).map(|_| horizon * rng.random::<f64>()).collect();
        jumps.sort_by(f64::total_cmp);
        jumps.dedup();
        jumps.retain(|&t| t > 0.0);
        let initial = if rng.random() { Spin::Up } else { Spin::Down };
        SpinPath::new(horizon, initial, jumps).unwrap()
    }

    fn phi(path: &SpinPath, kernel: &Kernel) -> f64 {
        path_interaction(path, kernel).unwrap()
    }

    fn brute_phi(path: &SpinPath, kernel: &Kernel) -> f64 {
        let segs: Vec<_> = path.segments().collect();
        let mut total = 0.0;
        for &(a, b, s) in &segs {
            for &(c, d, r) in &segs {
                total += s * r * kernel.double_integral(a, b, c, d).unwrap();
            }
        }
        total
    }

    #[test]
    fn interaction_matches_box_sum() {
        let mut rng = SimRng::seed_from_u64(5);
        for kernel in [Kernel::single_mode(1.0, 1.0).unwrap(), Kernel::poly(0.7).unwrap()] {
            for _ in 0..50 {
                let p = random_path(&mut rng, 3.0, 8);
                let (x, y) = (phi(&p, &kernel), brute_phi(&p, &kernel));
                assert!((x - y).abs() < 1e-10 * y.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn constant_path_interaction_is_twice_g() {
        let kernel = Kernel::single_mode(1.0, 1.0).unwrap();
        let p = SpinPath::constant(2.0, Spin::Down).unwrap();
        let expect = 2.0 * kernel.second_antideriv(2.0).unwrap();
        assert!((phi(&p, &kernel) - expect).abs() < 1e-14);
    }

    #[test]
    fn incremental_deltas_match_recomputation() {
        let kernel = Kernel::modes(&[(1.0, 0.5), (0.3, 3.0)]).unwrap();
        let mut rng = SimRng::seed_from_u64(9);
        for _ in 0..200 {
            let p = random_path(&mut rng, 4.0, 10);
            let base = phi(&p, &kernel);
            let tol = 1e-10 * base.abs().max(1.0);

            let u = 4.0 * rng.random::<f64>();
            let mut q = p.clone();
            q.insert_jump(u);
            let d = insert_delta(&p, &kernel, u).unwrap();
            assert!((base + d - phi(&q, &kernel)).abs() < tol);

            let k = p.num_jumps();
            if k > 0 {
                let j = rng.random_range(0..k);
                let mut q = p.clone();
                q.remove_jump(j);
                let d = delete_delta(&p, &kernel, j).unwrap();
                assert!((base + d - phi(&q, &kernel)).abs() < tol);

                let lo = if j == 0 { 0.0 } else { p.jumps()[j - 1] };
                let hi = if j + 1 == k { 4.0 } else { p.jumps()[j + 1] };
                let u = lo + (hi - lo) * rng.random::<f64>();
                if u > lo && u < hi && u != p.jumps()[j] {
                    let mut q = p.clone();
                    q.move_jump(j, u);
                    let d = relocate_delta(&p, &kernel, j, u).unwrap();
                    assert!((base + d - phi(&q, &kernel)).abs() < tol);
                }
            }
        }
    }

    #[test]
    fn pair_deltas_match_recomputation() {
        let kernel = Kernel::poly(0.8).unwrap();
        let mut rng = SimRng::seed_from_u64(10);
        for _ in 0..200 {
            let p = random_path(&mut rng, 4.0, 10);
            let base = phi(&p, &kernel);
            let tol = 1e-10 * base.abs().max(1.0);
            let a = 4.0 * rng.random::<f64>();
            let i = p.jumps().partition_point(|&x| x < a);
            let next = p.jumps().get(i).copied().unwrap_or(4.0);
            let b = a + (next - a) * rng.random::<f64>();
            if b > a && b < next {
                let mut q = p.clone();
                q.insert_jump(a);
                q.insert_jump(b);
                let d = pair_insert_delta(&p, &kernel, a, b).unwrap();
                assert!((base + d - phi(&q, &kernel)).abs() < tol);
            }
            let k = p.num_jumps();
            if k >= 2 {
                let j = rng.random_range(0..k - 1);
                let mut q = p.clone();
                q.remove_jump(j + 1);
                q.remove_jump(j);
                let d = pair_delete_delta(&p, &kernel, j).unwrap();
                assert!((base + d - phi(&q, &kernel)).abs() < tol);
            }
        }
    }

    #[test]
    fn insert_then_delete_restores_energy() {
        let kernel = Kernel::poly(1.0).unwrap();
        let mut rng = SimRng::seed_from_u64(11);
        let p = random_path(&mut rng, 5.0, 6);
        let u = 2.345;
        let up = insert_delta(&p, &kernel, u).unwrap();
        let mut q = p.clone();
        q.insert_jump(u);
        let j = q.jumps().iter().position(|&x| x == u).unwrap();
        let down = delete_delta(&q, &kernel, j).unwrap();
        assert!((up + down).abs() < 1e-12);
    }

    #[test]
    fn global_flip_is_exact_symmetry() {
        let kernel = Kernel::poly(1.0).unwrap();
        let mut rng = SimRng::seed_from_u64(12);
        for _ in 0..20 {
            let p = random_path(&mut rng, 3.0, 9);
            assert_eq!(phi(&p, &kernel), phi(&p.flipped(), &kernel));
        }
    }

    #[test]
    fn long_run_passes_drift_checks() {
        let params = IsingParams::new(0.5, 2.0, Kernel::poly(1.0).unwrap()).unwrap();
        let mut chain = ChainState::new(&params, 1).unwrap();
        for _ in 0..2 * DRIFT_CHECK_INTERVAL + 1 {
            chain.step(&params).unwrap();
        }
        chain.check_drift(&params.kernel).unwrap();
    }

    #[test]
    fn conditioned_chain_keeps_initial_spin() {
        let params = IsingParams::new(0.2, 2.0, Kernel::poly(1.0).unwrap())
            .unwrap()
            .conditioned();
        let mut chain = ChainState::new(&params, 3).unwrap();
        for _ in 0..5000 {
            let out = chain.step(&params).unwrap();
            assert_ne!(out.kind, MoveKind::Flip);
            assert_eq!(chain.path().initial(), Spin::Up);
        }
    }
}
