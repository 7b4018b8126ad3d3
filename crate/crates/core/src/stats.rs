//! Monte Carlo estimates with batch-means error bars.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, with_worker_cap, SimRng};

/// Number of batches used for batch-means error bars.
pub const DEFAULT_BATCHES: usize = 32;
/// Fewer batches than this and the error bar is not trusted.
pub const MIN_BATCHES: usize = 20;
/// Window constant for the automatic autocorrelation window.
const SOKAL_WINDOW: f64 = 5.0;

/// A Monte Carlo result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Integrated autocorrelation time in units of samples (0.5 for
    /// independent samples).
    pub autocorrelation_time: f64,
    pub seed: u64,
}

impl Estimate {
    /// A value with no statistical error.
    pub fn exact(value: f64, n_samples: usize, seed: u64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            n_samples,
            autocorrelation_time: 0.5,
            seed,
        }
    }

    /// Batch-means estimate from one time series.
    pub fn from_series(series: &[f64], seed: u64) -> Result<Self> {
        Self::pooled(&[series], seed)
    }

    /// Pools several independent series (one per chain). Each series is cut
    /// into [`DEFAULT_BATCHES`] batches and the error bar comes from the
    /// spread of all batch means together.
    pub fn pooled<S: AsRef<[f64]>>(series: &[S], seed: u64) -> Result<Self> {
        let mut batches = Vec::new();
        let mut n = 0;
        let mut tau_weighted = 0.0;
        for s in series {
            let s = s.as_ref();
            if s.len() < DEFAULT_BATCHES {
                return Err(Error::usage(format!(
                    "need at least {DEFAULT_BATCHES} samples per chain, got {}",
                    s.len()
                )));
            }
            let b = batch_means(s, DEFAULT_BATCHES);
            n += s.len();
            tau_weighted += integrated_autocorrelation_time(s) * s.len() as f64;
            batches.extend(b);
        }
        if batches.len() < MIN_BATCHES {
            return Err(Error::usage("no samples"));
        }
        let (mean, stderr) = mean_and_stderr(&batches);
        Ok(Estimate {
            mean,
            stderr,
            n_samples: n,
            autocorrelation_time: tau_weighted / n as f64,
            seed,
        })
    }

    pub fn effective_samples(&self) -> f64 {
        self.n_samples as f64 / (2.0 * self.autocorrelation_time.max(0.5))
    }

    pub fn relative_stderr(&self) -> f64 {
        if self.mean == 0.0 {
            if self.stderr == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.stderr / self.mean.abs()
        }
    }

    /// `1/x` with a first-order error bar.
    pub fn reciprocal(&self) -> Estimate {
        Estimate {
            mean: 1.0 / self.mean,
            stderr: self.stderr / (self.mean * self.mean),
            ..self.clone()
        }
    }

    /// `self - other` for independent estimates.
    pub fn minus(&self, other: &Estimate) -> (f64, f64) {
        (
            self.mean - other.mean,
            combined_stderr(self.stderr, other.stderr),
        )
    }
}

pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Means of `n_batches` equal consecutive batches. Leading samples that do
/// not fill a batch are dropped.
pub fn batch_means(series: &[f64], n_batches: usize) -> Vec<f64> {
    let size = series.len() / n_batches;
    if size == 0 {
        return Vec::new();
    }
    let skip = series.len() - size * n_batches;
    series[skip..]
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect()
}

/// Mean and standard error of the mean of (assumed independent) values.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Integrated autocorrelation time with an automatic window: the sum of the
/// normalized autocorrelations is cut at the first lag `W ≥ 5 τ(W)`.
pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centred.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    let max_lag = n / 4;
    for lag in 1..max_lag {
        let c = centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += c / c0;
        if lag as f64 >= SOKAL_WINDOW * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Jackknife over batches for a smooth function of several observables.
///
/// `rows[b][k]` is the batch-`b` mean of observable `k`. Returns the value of
/// `f` at the overall means and the jackknife standard error.
pub fn jackknife<F: Fn(&[f64]) -> f64>(rows: &[Vec<f64>], f: F) -> (f64, f64) {
    let nb = rows.len();
    let k = rows[0].len();
    let mut totals = vec![0.0; k];
    for r in rows {
        for (t, v) in totals.iter_mut().zip(r) {
            *t += v;
        }
    }
    let full: Vec<f64> = totals.iter().map(|t| t / nb as f64).collect();
    let value = f(&full);
    let leave_one_out: Vec<f64> = rows
        .iter()
        .map(|r| {
            let m: Vec<f64> = totals
                .iter()
                .zip(r)
                .map(|(t, v)| (t - v) / (nb - 1) as f64)
                .collect();
            f(&m)
        })
        .collect();
    let jm = leave_one_out.iter().sum::<f64>() / nb as f64;
    let var = leave_one_out.iter().map(|v| (v - jm).powi(2)).sum::<f64>() * (nb - 1) as f64
        / nb as f64;
    (value, var.sqrt())
}

/// Length and seeding of a Monte Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Sweeps per chain, burn-in included.
    pub n_sweeps: usize,
    pub burn_in: usize,
    /// Independent chains, run in parallel and pooled.
    pub chains: usize,
    pub seed: u64,
}

impl RunSettings {
    pub fn new(n_sweeps: usize, burn_in: usize, seed: u64) -> Self {
        RunSettings {
            n_sweeps,
            burn_in,
            chains: 4,
            seed,
        }
    }

    pub fn with_chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn recorded(&self) -> usize {
        self.n_sweeps.saturating_sub(self.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_sweeps {
            return Err(Error::usage(format!(
                "burn_in ({}) must be smaller than n_sweeps ({})",
                self.burn_in, self.n_sweeps
            )));
        }
        if self.recorded() < DEFAULT_BATCHES {
            return Err(Error::usage(format!(
                "need at least {DEFAULT_BATCHES} recorded sweeps, got {}",
                self.recorded()
            )));
        }
        if self.chains == 0 {
            return Err(Error::usage("chains must be >= 1"));
        }
        Ok(())
    }
}

/// Mean of `n_samples` independent draws of `draw`, spread over
/// [`DEFAULT_BATCHES`] random streams run in parallel. The error bar is the
/// spread of the per-stream means.
pub fn iid_estimate<F>(n_samples: usize, seed: u64, draw: F) -> Result<Estimate>
where
    F: Fn(&mut SimRng) -> Result<f64> + Sync,
{
    let mut v = iid_estimates(n_samples, seed, 1, |rng, out| {
        out[0] = draw(rng)?;
        Ok(())
    })?;
    Ok(v.remove(0))
}

/// [`iid_estimate`] for `k` observables drawn together.
pub fn iid_estimates<F>(n_samples: usize, seed: u64, k: usize, draw: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut SimRng, &mut [f64]) -> Result<()> + Sync,
{
    let per = n_samples / DEFAULT_BATCHES;
    if per == 0 {
        return Err(Error::usage(format!(
            "need at least {DEFAULT_BATCHES} samples, got {n_samples}"
        )));
    }
    let means: Vec<Vec<f64>> = with_worker_cap(|| {
        (0..DEFAULT_BATCHES)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream_rng(seed, b as u64);
                let mut total = vec![0.0; k];
                let mut buf = vec![0.0; k];
                for _ in 0..per {
                    draw(&mut rng, &mut buf)?;
                    for (t, v) in total.iter_mut().zip(&buf) {
                        *t += v;
                    }
                }
                Ok(total.into_iter().map(|t| t / per as f64).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    })?;
    Ok((0..k)
        .map(|j| {
            let col: Vec<f64> = means.iter().map(|m| m[j]).collect();
            let (mean, stderr) = mean_and_stderr(&col);
            Estimate {
                mean,
                stderr,
                n_samples: per * DEFAULT_BATCHES,
                autocorrelation_time: 0.5,
                seed,
            }
        })
        .collect())
}
