use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::ChainState;
use super::path::{cross_interaction, SpinPath};
use super::{alpha_from_lambda, IsingParams};
use crate::error::{Error, Result};
use crate::kernel::{InfraredClass, Kernel, KernelResult};
use crate::rng::{stream_rng, stream_seed, sub_seed, with_worker_cap};
use crate::stats::{combined_stderr, mean_and_stderr, Estimate, RunSettings, DEFAULT_BATCHES};

/// Largest series order accepted without `allow_high_order`.
pub const MAX_SERIES_ORDER: usize = 3;
/// Increments per doubling of the horizon shrinking faster than this
/// exponent count as converging (and growing faster as power-law growth).
const INCREMENT_SLOPE_BAND: f64 = 0.25;

/// Runs `settings.chains` pairs of independent conditioned chains in
/// lockstep and hands every post-burn-in pair of paths to `visit`.
fn run_pairs<S, I, V>(params: &IsingParams, settings: &RunSettings, init: I, visit: V) -> Result<Vec<S>>
where
    S: Send,
    I: Fn() -> S + Sync,
    V: Fn(&mut S, usize, &SpinPath, &SpinPath) + Sync,
{
    settings.validate()?;
    let params = params.clone().conditioned();
    with_worker_cap(|| {
        (0..settings.chains)
            .into_par_iter()
            .map(|p| {
                let mut left = ChainState::new(&params, sub_seed(settings.seed, p as u64, 0))?;
                let mut right = ChainState::new(&params, sub_seed(settings.seed, p as u64, 1))?;
                let mut state = init();
                for sweep in 0..settings.n_sweeps {
                    left.sweep(&params)?;
                    right.sweep(&params)?;
                    if sweep >= settings.burn_in {
                        visit(&mut state, sweep - settings.burn_in, left.path(), right.path());
                    }
                }
                Ok(state)
            })
            .collect()
    })
}

/// `Z_{α,2T} / Z_{α,T}²`, sampled as `E[exp(2α ∬ g(u+v) Y_u Z_v)]` over two
/// independent copies of the chain conditioned on `X_0 = +1`.
pub fn estimate_partition_ratio(params: &IsingParams, settings: &RunSettings) -> Result<Estimate> {
    if params.alpha == 0.0 {
        settings.validate()?;
        return Ok(Estimate::exact(
            1.0,
            settings.recorded() * settings.chains,
            settings.seed,
        ));
    }
    let kernel = &params.kernel;
    let two_alpha = 2.0 * params.alpha;
    let series = run_pairs(
        params,
        settings,
        || (Vec::with_capacity(settings.recorded()), None::<String>),
        |(s, err), _, left, right| match cross_interaction(left, right, kernel) {
            Ok(c) => s.push((two_alpha * c).exp()),
            Err(e) => {
                err.get_or_insert(e.to_string());
                s.push(f64::NAN);
            }
        },
    )?;
    let mut per_chain = Vec::with_capacity(series.len());
    for (s, err) in series {
        if let Some(e) = err {
            return Err(Error::Numerical(e));
        }
        per_chain.push(s);
    }
    Estimate::pooled(&per_chain, settings.seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoRatioReport {
    pub lambda: f64,
    pub alpha: f64,
    pub horizons: Vec<f64>,
    /// `Z_{2T}/Z_T²` per horizon.
    pub ratios: Vec<Estimate>,
    /// `Z_T²/Z_{2T}` per horizon; decreases to `ρ(λ)` as `T → ∞`.
    pub rho: Vec<Estimate>,
    /// Index of the last horizon of the first window of three successive
    /// horizons whose estimates agree pairwise within two combined stderr.
    pub plateau_index: Option<usize>,
    pub plateau: Option<Estimate>,
    /// The plateau rule is a stopping heuristic, not a convergence proof.
    pub heuristic: bool,
}

/// `ρ_T = Z_T²/Z_{2T}` along increasing horizons with a plateau diagnostic.
pub fn estimate_rho_ratio(
    lambda: f64,
    kernel: &Kernel,
    horizons: &[f64],
    settings: &RunSettings,
) -> Result<RhoRatioReport> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("horizons must be nonempty and strictly increasing"));
    }
    let alpha = alpha_from_lambda(lambda);
    let mut ratios = Vec::with_capacity(horizons.len());
    for (i, &t) in horizons.iter().enumerate() {
        let params = IsingParams::new(alpha, t, kernel.clone())?.conditioned();
        let run = RunSettings {
            seed: stream_seed(settings.seed, i as u64),
            ..*settings
        };
        ratios.push(estimate_partition_ratio(&params, &run)?);
    }
    let rho: Vec<Estimate> = ratios.iter().map(Estimate::reciprocal).collect();
    let plateau_index = find_plateau(&rho);
    Ok(RhoRatioReport {
        lambda,
        alpha,
        horizons: horizons.to_vec(),
        plateau: plateau_index.map(|i| rho[i].clone()),
        ratios,
        rho,
        plateau_index,
        heuristic: true,
    })
}

fn find_plateau(values: &[Estimate]) -> Option<usize> {
    let agree = |a: &Estimate, b: &Estimate| {
        (a.mean - b.mean).abs() <= 2.0 * combined_stderr(a.stderr, b.stderr)
    };
    (2..values.len()).find(|&i| {
        let w = &values[i - 2..=i];
        agree(&w[0], &w[1]) && agree(&w[1], &w[2]) && agree(&w[0], &w[2])
    })
}

/// `exp(-(λ²/4) ∫_0^∞ t g(t) e^{-2t} dt)`, an upper bound for `ρ(λ)`.
pub fn overlap_upper_bound(lambda: f64, kernel: &Kernel) -> KernelResult<f64> {
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok((-(lambda * lambda / 4.0) * kernel.overlap_bound_integral()?).exp())
}

/// Where the correlation functions inside the series come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationSource {
    /// Two conditioned chains at the requested coupling.
    #[default]
    Chains,
    /// The exact free correlations (`α = 0`) with the coupling kept only in
    /// the prefactor. Isolates the quadrature part of the estimator.
    FreeProxy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSettings {
    pub n_max: usize,
    /// Integration horizon; defaults to 50 times the kernel decay scale.
    pub t_max: Option<f64>,
    /// Importance-sampling nodes per order.
    pub nodes: usize,
    pub run: RunSettings,
    pub source: CorrelationSource,
    pub allow_high_order: bool,
}

impl SeriesSettings {
    pub fn new(n_max: usize, run: RunSettings) -> Self {
        SeriesSettings {
            n_max,
            t_max: None,
            nodes: 2048,
            run,
            source: CorrelationSource::Chains,
            allow_high_order: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub lambda: f64,
    pub alpha: f64,
    pub t_max: f64,
    /// `∫_{[0,T_max]^n} (τ_n ∗ τ_n)(t) ∏ g(t_i) dt` for `n = 0..=n_max`.
    pub integrals: Vec<Estimate>,
    /// `(2α)^n / n!` times the integrals.
    pub terms: Vec<Estimate>,
    pub sum: Estimate,
    /// `1/S`, an upper estimate of `ρ(λ)` since the omitted terms are `≥ 0`.
    pub rho_upper: Estimate,
    /// Nested horizons of the first-order diagnostic.
    pub first_order_horizons: Vec<f64>,
    /// First-order term restricted to `t ≤ h` for each horizon.
    pub first_order_values: Vec<Estimate>,
    /// First-order term restricted to `h_(k-1) < t ≤ h_k`, estimated directly.
    pub first_order_increments: Vec<Estimate>,
    pub first_order_class: InfraredClass,
    pub warnings: Vec<String>,
}

/// Exact free correlation `E_0[∏ X_{s_i} | X_0 = 1]`.
fn free_correlation(points: &[f64]) -> f64 {
    // X_0 = 1 only matters for odd products, where it pairs with a point
    let mut all: Vec<f64> = Vec::with_capacity(points.len() + 1);
    if points.len() % 2 == 1 {
        all.push(0.0);
    }
    all.extend_from_slice(points);
    all.sort_by(f64::total_cmp);
    all.chunks_exact(2)
        .map(|p| (-2.0 * (p[1] - p[0])).exp())
        .product()
}

/// Draws `t` on `[0, t_max]` with density `g(t)/F(t_max)` by inverting `F`.
fn sample_by_kernel<R: Rng>(kernel: &Kernel, mass: f64, t_max: f64, rng: &mut R) -> KernelResult<f64> {
    let target = mass * rng.random::<f64>();
    let (mut lo, mut hi) = (0.0, t_max);
    let mut t = 0.5 * t_max;
    for _ in 0..100 {
        let f = kernel.first_antideriv(t)? - target;
        if f.abs() <= 1e-14 * mass {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo <= 1e-13 * t_max {
            break;
        }
        // Newton step, bisection when it leaves the bracket
        let g = kernel.eval(t)?;
        let newton = t - f / g;
        t = if g > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(t)
}

struct Node {
    /// `∏ t_i F(T_max)`: integrand over sampling density, up to `τ τ`.
    weight: f64,
    t_first: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

fn draw_nodes(kernel: &Kernel, order: usize, count: usize, t_max: f64, seed: u64) -> KernelResult<Vec<Node>> {
    let mass = kernel.first_antideriv(t_max)?;
    let mut rng = stream_rng(seed, 0x5e71e5 + order as u64);
    (0..count)
        .map(|_| {
            let mut weight = 1.0;
            let mut left = Vec::with_capacity(order);
            let mut right = Vec::with_capacity(order);
            let mut t_first = 0.0;
            for i in 0..order {
                let t = sample_by_kernel(kernel, mass, t_max, &mut rng)?;
                let s = t * rng.random::<f64>();
                if i == 0 {
                    t_first = t;
                }
                weight *= t * mass;
                left.push(s);
                right.push(t - s);
            }
            Ok(Node {
                weight,
                t_first,
                left,
                right,
            })
        })
        .collect()
}

/// Per-batch node averages of the two chains.
struct BatchAccumulator {
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

/// Combines per-batch node values into estimates for each band of `bands`.
/// `values[b][m]` is the batch-`b` value of node `m`; the stderr adds the
/// batch spread (chain noise) to the node spread (quadrature noise).
fn banded_estimates(
    nodes: &[Node],
    batch_values: &[Vec<f64>],
    overall: &[f64],
    masks: &[Vec<bool>],
    seed: u64,
    n_samples: usize,
) -> Vec<Estimate> {
    let m = nodes.len() as f64;
    masks
        .iter()
        .map(|mask| {
            let per_batch: Vec<f64> = batch_values
                .iter()
                .map(|vals| vals.iter().zip(mask).filter(|(_, &k)| k).map(|(v, _)| v).sum::<f64>() / m)
                .collect();
            let contrib: Vec<f64> = overall
                .iter()
                .zip(mask)
                .map(|(v, &k)| if k { *v } else { 0.0 })
                .collect();
            let (_, node_err) = mean_and_stderr(&contrib);
            let (mean, chain_err) = if per_batch.is_empty() {
                (contrib.iter().sum::<f64>() / m, 0.0)
            } else {
                mean_and_stderr(&per_batch)
            };
            Estimate {
                mean,
                stderr: combined_stderr(chain_err, node_err),
                n_samples,
                autocorrelation_time: 0.5,
                seed,
            }
        })
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Truncated series for `1/ρ(λ)` with a first-order infrared diagnostic.
pub fn estimate_rho_series(lambda: f64, kernel: &Kernel, settings: &SeriesSettings) -> Result<SeriesReport> {
    if settings.n_max > MAX_SERIES_ORDER && !settings.allow_high_order {
        return Err(Error::usage(format!(
            "n_max = {} exceeds {MAX_SERIES_ORDER}; set allow_high_order to force it",
            settings.n_max
        )));
    }
    if settings.nodes < 2 {
        return Err(Error::usage("need at least 2 quadrature nodes"));
    }
    let run = settings.run;
    let alpha = alpha_from_lambda(lambda);
    let t_max = settings.t_max.unwrap_or(50.0 * kernel.decay_scale());
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::usage(format!("t_max must be > 0, got {t_max}")));
    }
    let mut warnings = Vec::new();
    if let Some(total) = kernel.total_mass() {
        let covered = kernel.first_antideriv(t_max)?;
        if covered < 0.99 * total {
            warnings.push(format!(
                "t_max = {t_max} covers only {:.1}% of the kernel mass",
                100.0 * covered / total
            ));
        }
    }
    let horizons: Vec<f64> = [8.0, 4.0, 2.0, 1.0].iter().map(|d| t_max / d).collect();

    let mut integrals = vec![Estimate::exact(1.0, 0, run.seed)];
    let mut first_order_values = Vec::new();
    let mut first_order_increments = Vec::new();
    if alpha == 0.0 && settings.source == CorrelationSource::Chains {
        // every term beyond the first carries a factor α^n
        run.validate()?;
        for _ in 1..=settings.n_max {
            integrals.push(Estimate::exact(0.0, 0, run.seed));
        }
        if settings.n_max >= 1 {
            first_order_values = horizons.iter().map(|_| Estimate::exact(0.0, 0, run.seed)).collect();
            first_order_increments = horizons[1..].iter().map(|_| Estimate::exact(0.0, 0, run.seed)).collect();
        }
    } else {
        for order in 1..=settings.n_max {
            let nodes = draw_nodes(kernel, order, settings.nodes, t_max, run.seed)?;
            let (batch_values, overall, n_samples) = match settings.source {
                CorrelationSource::FreeProxy => {
                    let overall: Vec<f64> = nodes
                        .iter()
                        .map(|n| n.weight * free_correlation(&n.left) * free_correlation(&n.right))
                        .collect();
                    (Vec::new(), overall, nodes.len())
                }
                CorrelationSource::Chains => {
                    let params = IsingParams::new(alpha, t_max, kernel.clone())?;
                    let order_run = RunSettings {
                        seed: stream_seed(run.seed, order as u64),
                        ..run
                    };
                    chain_node_values(&params, &order_run, &nodes)?
                }
            };
            let mut masks = vec![vec![true; nodes.len()]];
            if order == 1 {
                for &h in &horizons {
                    masks.push(nodes.iter().map(|n| n.t_first <= h).collect());
                }
                for w in horizons.windows(2) {
                    masks.push(nodes.iter().map(|n| n.t_first > w[0] && n.t_first <= w[1]).collect());
                }
            }
            let mut est = banded_estimates(&nodes, &batch_values, &overall, &masks, run.seed, n_samples);
            let full = est.remove(0);
            if order == 1 {
                first_order_increments = est.split_off(horizons.len());
                first_order_values = est;
            }
            integrals.push(full);
        }
    }

    let terms: Vec<Estimate> = integrals
        .iter()
        .enumerate()
        .map(|(n, e)| {
            let c = (2.0 * alpha).powi(n as i32) / factorial(n);
            Estimate {
                mean: c * e.mean,
                stderr: c * e.stderr,
                ..e.clone()
            }
        })
        .collect();
    let sum_mean: f64 = terms.iter().map(|t| t.mean).sum();
    let sum_err = terms.iter().map(|t| t.stderr * t.stderr).sum::<f64>().sqrt();
    let sum = Estimate {
        mean: sum_mean,
        stderr: sum_err,
        n_samples: terms.iter().map(|t| t.n_samples).max().unwrap_or(0),
        autocorrelation_time: 0.5,
        seed: run.seed,
    };
    let scale = |v: Vec<Estimate>| -> Vec<Estimate> {
        v.into_iter()
            .map(|e| Estimate {
                mean: 2.0 * alpha * e.mean,
                stderr: 2.0 * alpha * e.stderr,
                ..e
            })
            .collect()
    };
    let first_order_values = scale(first_order_values);
    let first_order_increments = scale(first_order_increments);
    let first_order_class = classify_first_order(&first_order_values, &first_order_increments);
    Ok(SeriesReport {
        lambda,
        alpha,
        t_max,
        integrals,
        rho_upper: sum.reciprocal(),
        sum,
        terms,
        first_order_horizons: if settings.n_max >= 1 { horizons } else { Vec::new() },
        first_order_values,
        first_order_increments,
        first_order_class,
        warnings,
    })
}

/// Runs the chain pairs and returns per-batch node values, overall node
/// values and the sample count.
fn chain_node_values(params: &IsingParams, run: &RunSettings, nodes: &[Node]) -> Result<(Vec<Vec<f64>>, Vec<f64>, usize)> {
    let recorded = run.recorded();
    let size = recorded / DEFAULT_BATCHES;
    let skip = recorded - size * DEFAULT_BATCHES;
    let m = nodes.len();
    let accs = run_pairs(
        params,
        run,
        || BatchAccumulator {
            left: vec![vec![0.0; m]; DEFAULT_BATCHES],
            right: vec![vec![0.0; m]; DEFAULT_BATCHES],
            counts: vec![0; DEFAULT_BATCHES],
        },
        |acc, r, left, right| {
            if r < skip {
                return;
            }
            let b = (r - skip) / size;
            acc.counts[b] += 1;
            for (j, n) in nodes.iter().enumerate() {
                acc.left[b][j] += left.product_at(&n.left);
                acc.right[b][j] += right.product_at(&n.right);
            }
        },
    )?;
    let mut batch_values = Vec::with_capacity(accs.len() * DEFAULT_BATCHES);
    let mut total_left = vec![0.0; m];
    let mut total_right = vec![0.0; m];
    let mut total_count = 0usize;
    for acc in &accs {
        for b in 0..DEFAULT_BATCHES {
            let c = acc.counts[b] as f64;
            batch_values.push(
                nodes
                    .iter()
                    .enumerate()
                    .map(|(j, n)| n.weight * (acc.left[b][j] / c) * (acc.right[b][j] / c))
                    .collect(),
            );
            for j in 0..m {
                total_left[j] += acc.left[b][j];
                total_right[j] += acc.right[b][j];
            }
            total_count += acc.counts[b];
        }
    }
    let tc = total_count as f64;
    let overall = nodes
        .iter()
        .enumerate()
        .map(|(j, n)| n.weight * (total_left[j] / tc) * (total_right[j] / tc))
        .collect();
    Ok((batch_values, overall, total_count))
}

/// Labels the growth of the first-order term from its increments between
/// successive doubled horizons.
fn classify_first_order(values: &[Estimate], increments: &[Estimate]) -> InfraredClass {
    let n = increments.len();
    if n < 2 || values.is_empty() {
        return InfraredClass::Regular;
    }
    let (d_prev, e_prev) = (increments[n - 2].mean, increments[n - 2].stderr);
    let (d_last, e_last) = (increments[n - 1].mean, increments[n - 1].stderr);
    let total = values[values.len() - 1].mean.abs();
    let significant = d_last > 3.0 * e_last && d_last > 1e-3 * total;
    if !significant {
        return InfraredClass::Regular;
    }
    if d_prev <= 0.0 {
        return InfraredClass::Divergent;
    }
    // horizons double, so the exponent is log2 of the increment ratio
    let exponent = (d_last / d_prev).log2();
    let exponent_err =
        ((e_last / d_last).powi(2) + (e_prev / d_prev).powi(2)).sqrt() / std::f64::consts::LN_2;
    let band = INCREMENT_SLOPE_BAND + 2.0 * exponent_err;
    if exponent < -band {
        InfraredClass::Regular
    } else if exponent <= band {
        InfraredClass::DivergentLog
    } else {
        InfraredClass::Divergent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_correlation_pairs_points() {
        assert_eq!(free_correlation(&[]), 1.0);
        let v = free_correlation(&[0.3, 0.1]);
        assert!((v - (-2.0 * 0.2f64).exp()).abs() < 1e-15);
        assert!((free_correlation(&[1.0]) - (-2.0f64).exp()).abs() < 1e-15);
        let v = free_correlation(&[2.0, 0.5, 1.0]);
        assert!((v - (-2.0 * 0.5f64).exp() * (-2.0 * 1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn first_order_class_uses_increment_errors() {
        let e = |m: f64, s: f64| Estimate {
            mean: m,
            stderr: s,
            n_samples: 1,
            autocorrelation_time: 0.5,
            seed: 0,
        };
        let total = [e(10.0, 0.1)];
        let flat = [e(1.0, 0.01), e(1.0, 0.01)];
        assert_eq!(classify_first_order(&total, &flat), InfraredClass::DivergentLog);
        let noisy_flat = [e(29.0, 3.8), e(22.7, 4.8)];
        assert_eq!(classify_first_order(&total, &noisy_flat), InfraredClass::DivergentLog);
        let shrinking = [e(1.0, 0.01), e(0.25, 0.01)];
        assert_eq!(classify_first_order(&total, &shrinking), InfraredClass::Regular);
        let growing = [e(1.0, 0.01), e(4.0, 0.01)];
        assert_eq!(classify_first_order(&total, &growing), InfraredClass::Divergent);
        let insignificant = [e(1.0, 0.01), e(0.02, 0.01)];
        assert_eq!(classify_first_order(&total, &insignificant), InfraredClass::Regular);
    }

    #[test]
    fn plateau_needs_three_agreeing_values() {
        let e = |m: f64| Estimate {
            mean: m,
            stderr: 0.01,
            n_samples: 1,
            autocorrelation_time: 0.5,
            seed: 0,
        };
        assert_eq!(find_plateau(&[e(0.9), e(0.8), e(0.79), e(0.79)]), Some(3));
        assert_eq!(find_plateau(&[e(0.9), e(0.8), e(0.7)]), None);
    }

    #[test]
    fn kernel_sampling_matches_cdf() {
        let k = Kernel::poly(1.0).unwrap();
        let mass = k.first_antideriv(10.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let n = 20_000;
        let below = (0..n)
            .filter(|_| sample_by_kernel(&k, mass, 10.0, &mut rng).unwrap() <= 1.0)
            .count();
        let p = (1.0f64).atan() / 10.0f64.atan();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((below as f64 / n as f64 - p).abs() < 4.0 * se);
    }
}
