use serde::{Deserialize, Serialize};

use super::continuum_two_point;
use crate::error::{Error, Result};
use crate::ising_continuum::{estimate_correlations, IsingParams};
use crate::ising_discrete::{bond_percolation_two_point, LatticeModel};
use crate::kernel::Kernel;
use crate::rng::{stream_seed, sub_seed};
use crate::stats::{combined_stderr, Estimate, RunSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Grid points per unit time.
    pub n_per_unit: usize,
    pub delta: f64,
    pub discrete: Estimate,
    /// `|discrete - continuum|`.
    pub gap: f64,
    pub gap_stderr: f64,
    /// At `α = 0`: the exact discrete value `(1 - 2δ)^{n/δ}`.
    pub closed_form: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub alpha: f64,
    pub horizon: f64,
    pub n: u64,
    pub continuum: Estimate,
    /// At `α = 0`: `e^{-2n}`.
    pub continuum_exact: Option<f64>,
    pub rows: Vec<ConvergenceRow>,
    /// Every gap is at most the previous one plus three combined stderr.
    pub nonincreasing: bool,
}

/// Discrete bond percolation on the grid of spacing `1/N` against the
/// continuum percolation, for the two-point function `P(0 ↔ n)`.
pub fn appendix_convergence_experiment(
    alpha: f64,
    horizon: f64,
    kernel: &Kernel,
    n: u64,
    n_list: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<ConvergenceTable> {
    if horizon.fract() != 0.0 || horizon < 1.0 {
        return Err(Error::usage(format!("horizon must be a positive integer, got {horizon}")));
    }
    if n as f64 > horizon {
        return Err(Error::usage(format!("n = {n} exceeds the horizon {horizon}")));
    }
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("N list must be nonempty and increasing"));
    }
    let continuum = continuum_two_point(alpha, horizon, kernel, 0.0, n as f64, n_samples, stream_seed(seed, 0))?;
    let mut rows = Vec::with_capacity(n_list.len());
    for (i, &per_unit) in n_list.iter().enumerate() {
        let intervals = horizon as usize * per_unit;
        let model = LatticeModel::new(horizon, intervals, alpha, kernel.clone())?;
        let target = n as usize * per_unit;
        let discrete = bond_percolation_two_point(&model, 0, target, n_samples, stream_seed(seed, i as u64 + 1))?;
        let (d, e) = discrete.minus(&continuum);
        let delta = model.delta();
        rows.push(ConvergenceRow {
            n_per_unit: per_unit,
            delta,
            gap: d.abs(),
            gap_stderr: e,
            closed_form: (alpha == 0.0).then(|| (1.0 - 2.0 * delta).powi(target as i32)),
            discrete,
        });
    }
    let nonincreasing = rows
        .windows(2)
        .all(|w| w[1].gap <= w[0].gap + 3.0 * combined_stderr(w[0].gap_stderr, w[1].gap_stderr));
    Ok(ConvergenceTable {
        alpha,
        horizon,
        n,
        continuum,
        continuum_exact: (alpha == 0.0).then(|| (-2.0 * n as f64).exp()),
        rows,
        nonincreasing,
    })
}

/// Values below this at the largest time count as decay.
pub const DECAY_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LroClass {
    Decay,
    Plateau,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LroSettings {
    pub alphas: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub horizon: f64,
    pub run: RunSettings,
    /// Samples per percolation lower bound; 0 skips them.
    pub percolation_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LroEntry {
    pub alpha: f64,
    pub classification: LroClass,
    /// Mean of `τ` over the second half of the grid, for plateaus.
    pub plateau_level: Option<f64>,
    pub stderr: Option<f64>,
    /// `τ_{α,1,T}(t)` on the grid.
    pub tau: Vec<Estimate>,
    /// `P(0 ↔ t)` in the continuum percolation, a lower bound for `τ`.
    pub percolation: Vec<Estimate>,
}

/// The per-coupling summary written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LroSummary {
    pub alpha: f64,
    pub classification: LroClass,
    pub plateau_level: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LroReport {
    pub kernel_id: String,
    pub t_grid: Vec<f64>,
    pub entries: Vec<LroEntry>,
    /// Largest decaying and smallest plateau coupling, when both occur in
    /// that order.
    pub crossover: Option<(f64, f64)>,
    pub threshold: f64,
    /// The decay threshold and flatness rule are conventions of this tool.
    pub conventions: String,
}

impl LroReport {
    pub fn summary(&self) -> Vec<LroSummary> {
        self.entries
            .iter()
            .map(|e| LroSummary {
                alpha: e.alpha,
                classification: e.classification,
                plateau_level: e.plateau_level,
                stderr: e.stderr,
            })
            .collect()
    }
}

/// Decay when the last value is below the threshold and below the first;
/// plateau when the second half of the grid is flat (least-squares slope
/// within two stderr of zero) above the threshold.
fn classify(t_grid: &[f64], tau: &[Estimate]) -> (LroClass, Option<f64>, Option<f64>) {
    let last = tau.last().expect("nonempty grid");
    if last.mean < DECAY_THRESHOLD && last.mean < tau[0].mean {
        return (LroClass::Decay, None, None);
    }
    let start = (tau.len() / 2).min(tau.len().saturating_sub(2));
    let (ts, vs) = (&t_grid[start..], &tau[start..]);
    let m = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / m;
    let v_mean = vs.iter().map(|v| v.mean).sum::<f64>() / m;
    let sxx: f64 = ts.iter().map(|t| (t - t_mean).powi(2)).sum();
    let slope = ts.iter().zip(vs).map(|(t, v)| (t - t_mean) * (v.mean - v_mean)).sum::<f64>() / sxx;
    let slope_err = ts
        .iter()
        .zip(vs)
        .map(|(t, v)| ((t - t_mean) * v.stderr).powi(2))
        .sum::<f64>()
        .sqrt()
        / sxx;
    let level_err = vs.iter().map(|v| v.stderr * v.stderr).sum::<f64>().sqrt() / m;
    if last.mean >= DECAY_THRESHOLD && slope.abs() <= 2.0 * slope_err {
        (LroClass::Plateau, Some(v_mean), Some(level_err))
    } else {
        (LroClass::Undetermined, None, None)
    }
}

/// Scans `τ_{α,1}` over couplings and classifies each as decaying or
/// ordered.
pub fn long_range_order_scan(kernel: &Kernel, settings: &LroSettings, seed: u64) -> Result<LroReport> {
    let grid = &settings.t_grid;
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("t_grid needs at least two increasing times"));
    }
    if grid[0] < 0.0 || *grid.last().expect("nonempty") > settings.horizon {
        return Err(Error::usage("t_grid must lie in [0, horizon]"));
    }
    let sets: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t]).collect();
    let mut entries = Vec::with_capacity(settings.alphas.len());
    for (i, &alpha) in settings.alphas.iter().enumerate() {
        let params = IsingParams::new(alpha, settings.horizon, kernel.clone())?;
        let run = RunSettings {
            seed: stream_seed(seed, i as u64),
            ..settings.run
        };
        let tau = estimate_correlations(&params, &sets, &run)?;
        let percolation = if settings.percolation_samples > 0 {
            grid.iter()
                .enumerate()
                .map(|(j, &t)| {
                    continuum_two_point(
                        alpha,
                        settings.horizon,
                        kernel,
                        0.0,
                        t,
                        settings.percolation_samples,
                        sub_seed(seed, i as u64, j as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let (classification, plateau_level, stderr) = classify(grid, &tau);
        entries.push(LroEntry {
            alpha,
            classification,
            plateau_level,
            stderr,
            tau,
            percolation,
        });
    }
    let mut sorted: Vec<&LroEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let last_decay = sorted.iter().filter(|e| e.classification == LroClass::Decay).map(|e| e.alpha).fold(None, |_, a| Some(a));
    let first_plateau = sorted.iter().find(|e| e.classification == LroClass::Plateau).map(|e| e.alpha);
    let crossover = match (last_decay, first_plateau) {
        (Some(a), Some(b)) if a < b => Some((a, b)),
        _ => None,
    };
    Ok(LroReport {
        kernel_id: kernel.id(),
        t_grid: grid.clone(),
        entries,
        crossover,
        threshold: DECAY_THRESHOLD,
        conventions: format!(
            "decay: tau(t_max) < {DECAY_THRESHOLD} and below tau(t_min); plateau: second-half slope within 2 stderr of 0 and tau(t_max) >= {DECAY_THRESHOLD}"
        ),
    })
}
