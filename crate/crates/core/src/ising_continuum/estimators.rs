use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{ChainState, MoveStats};
use super::path::{path_interaction, Spin, SpinPath};
use super::IsingParams;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, stream_seed, with_worker_cap};
use crate::stats::{batch_means, mean_and_stderr, Estimate, RunSettings, DEFAULT_BATCHES};

/// Per-sweep measurements: `series[chain][observable][sweep]`.
#[derive(Clone, Debug)]
pub struct ChainSamples {
    pub series: Vec<Vec<Vec<f64>>>,
    pub stats: MoveStats,
    pub seed: u64,
}

impl ChainSamples {
    pub fn observables(&self) -> usize {
        self.series.first().map_or(0, |c| c.len())
    }

    pub fn estimate(&self, observable: usize) -> Result<Estimate> {
        let per_chain: Vec<&[f64]> = self
            .series
            .iter()
            .map(|c| c[observable].as_slice())
            .collect();
        Estimate::pooled(&per_chain, self.seed)
    }

    pub fn estimates(&self) -> Result<Vec<Estimate>> {
        (0..self.observables()).map(|k| self.estimate(k)).collect()
    }

    /// Batch means of all observables, one row per (chain, batch).
    pub fn batch_rows(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for chain in &self.series {
            let cols: Vec<Vec<f64>> = chain
                .iter()
                .map(|s| batch_means(s, DEFAULT_BATCHES))
                .collect();
            for b in 0..cols[0].len() {
                rows.push(cols.iter().map(|c| c[b]).collect());
            }
        }
        rows
    }
}

/// Runs `settings.chains` independent chains and records `n_obs`
/// observables after every post-burn-in sweep.
pub fn run_chains<F>(
    params: &IsingParams,
    settings: &RunSettings,
    n_obs: usize,
    measure: F,
) -> Result<ChainSamples>
where
    F: Fn(&SpinPath, &mut [f64]) + Sync,
{
    settings.validate()?;
    let results: Vec<(Vec<Vec<f64>>, MoveStats)> = with_worker_cap(|| {
        (0..settings.chains)
            .into_par_iter()
            .map(|c| {
                let mut chain = ChainState::new(params, stream_seed(settings.seed, c as u64))?;
                let mut series = vec![Vec::with_capacity(settings.recorded()); n_obs];
                let mut buf = vec![0.0; n_obs];
                for sweep in 0..settings.n_sweeps {
                    chain.sweep(params)?;
                    if sweep >= settings.burn_in {
                        measure(chain.path(), &mut buf);
                        for (s, v) in series.iter_mut().zip(&buf) {
                            s.push(*v);
                        }
                    }
                }
                Ok((series, *chain.stats()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut stats = MoveStats::default();
    let mut series = Vec::with_capacity(results.len());
    for (s, st) in results {
        stats.merge(&st);
        series.push(s);
    }
    Ok(ChainSamples {
        series,
        stats,
        seed: settings.seed,
    })
}

fn check_times(params: &IsingParams, times: &[f64]) -> Result<()> {
    if times.iter().any(|&t| !(0.0..=params.horizon).contains(&t)) {
        return Err(Error::usage(format!(
            "time points must lie in [0, {}]",
            params.horizon
        )));
    }
    Ok(())
}

/// `E[X_0 ∏ X_{t_i}]` under the continuum Ising measure.
pub fn estimate_correlation(
    params: &IsingParams,
    times: &[f64],
    settings: &RunSettings,
) -> Result<Estimate> {
    let mut v = estimate_correlations(params, &[times.to_vec()], settings)?;
    Ok(v.remove(0))
}

/// Several correlations `E[X_0 ∏_{t ∈ set} X_t]` from the same chains.
pub fn estimate_correlations(
    params: &IsingParams,
    sets: &[Vec<f64>],
    settings: &RunSettings,
) -> Result<Vec<Estimate>> {
    for s in sets {
        check_times(params, s)?;
    }
    let samples = run_chains(params, settings, sets.len(), |path, out| {
        let x0 = path.spin_at(0.0);
        for (o, s) in out.iter_mut().zip(sets) {
            *o = x0 * path.product_at(s);
        }
    })?;
    samples.estimates()
}

/// `(1/T) E[(∫_0^T X_t dt)²]`.
pub fn estimate_susceptibility(params: &IsingParams, settings: &RunSettings) -> Result<Estimate> {
    let t = params.horizon;
    let samples = run_chains(params, settings, 1, |path, out| {
        let m = path.integral();
        out[0] = m * m / t;
    })?;
    samples.estimate(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    /// Estimate of `Z_T / Z_T^{(0)} = E_free[e^{α Φ}]`.
    pub estimate: Estimate,
    /// `(Σw)² / Σw²` over all samples.
    pub effective_samples: f64,
    /// Set when the weights are too uneven for the error bar to be trusted.
    pub high_variance: bool,
}

/// Plain Monte Carlo over free paths of `E[exp(α Φ(X))]`.
///
/// Only reliable when `α ∬ g` is small; otherwise a handful of paths carry
/// all the weight and `high_variance` is set.
pub fn estimate_partition_function_direct(
    params: &IsingParams,
    n_samples: usize,
    seed: u64,
) -> Result<PartitionEstimate> {
    let per_batch = n_samples / DEFAULT_BATCHES;
    if per_batch == 0 {
        return Err(Error::usage(format!(
            "need at least {DEFAULT_BATCHES} samples, got {n_samples}"
        )));
    }
    if params.alpha == 0.0 {
        return Ok(PartitionEstimate {
            estimate: Estimate::exact(1.0, n_samples, seed),
            effective_samples: n_samples as f64,
            high_variance: false,
        });
    }
    let t = params.horizon;
    let poisson = Poisson::new(t).map_err(|e| Error::InvalidModel(e.to_string()))?;
    // (Σw, Σw²) per batch, each batch on its own stream
    let sums: Vec<(f64, f64)> = with_worker_cap(|| {
        (0..DEFAULT_BATCHES)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed, b as u64);
                let mut sw = 0.0;
                let mut sw2 = 0.0;
                for _ in 0..per_batch {
                    let k = poisson.sample(&mut rng) as usize;
                    let mut jumps: Vec<f64> = (0..k).map(|_| t * rng.random::<f64>()).collect();
                    jumps.sort_by(f64::total_cmp);
                    jumps.dedup();
                    jumps.retain(|&x| x > 0.0);
                    let path = SpinPath::new(t, Spin::Up, jumps)?;
                    let w = (params.alpha * path_interaction(&path, &params.kernel)?).exp();
                    if !w.is_finite() {
                        return Err(Error::Numerical("path weight overflowed".into()));
                    }
                    sw += w;
                    sw2 += w * w;
                }
                Ok((sw, sw2))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let means: Vec<f64> = sums.iter().map(|(s, _)| s / per_batch as f64).collect();
    let (mean, stderr) = mean_and_stderr(&means);
    let total: f64 = sums.iter().map(|s| s.0).sum();
    let total2: f64 = sums.iter().map(|s| s.1).sum();
    let n = (per_batch * DEFAULT_BATCHES) as f64;
    let effective_samples = total * total / total2;
    let estimate = Estimate {
        mean,
        stderr,
        n_samples: n as usize,
        autocorrelation_time: 0.5,
        seed,
    };
    Ok(PartitionEstimate {
        high_variance: effective_samples < 0.01 * n || estimate.relative_stderr() > 0.1,
        estimate,
        effective_samples,
    })
}
