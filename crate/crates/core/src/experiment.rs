//! Config-driven experiment runs.
//!
//! A run writes `<experiment>.csv` (the common row schema), any
//! experiment-specific tables, `summary.json` and finally `manifest.json`
//! into the configured output directory.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::fock::{cutoff_convergence, feynman_kac_check, semigroup_overlap, TruncatedModel};
use crate::ising_continuum::{
    estimate_correlations, estimate_rho_ratio, estimate_rho_series, estimate_susceptibility, overlap_upper_bound,
    IsingParams, SeriesSettings,
};
use crate::ising_discrete::{bond_percolation_two_point, exact_correlation, exact_fk_two_point, LatticeModel};
use crate::output::{csv_bytes, json_bytes, rows_csv, sha256_hex, timestamp, write_files, Row, RunManifest};
use crate::percolation::{appendix_convergence_experiment, continuum_two_point, long_range_order_scan, LroSettings};
use crate::rng::{stream_seed, sub_seed};

/// Data produced by an experiment before it is written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub rows: Vec<Row>,
    pub summary: Value,
    /// Extra CSV files as `(file name, contents)`.
    pub tables: Vec<(String, Vec<u8>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub artifacts: Artifacts,
    pub manifest: RunManifest,
}

/// The `fock_validate` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockRow {
    pub lambda: f64,
    pub n_max: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub rho: f64,
    pub gap: f64,
}

/// Runs the experiment and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let started = timestamp();
    let artifacts = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numerical(e.to_string()))?
            .install(|| compute(cfg))?,
        None => compute(cfg)?,
    };
    let name = cfg.experiment.name();
    let mut files = vec![(format!("{name}.csv"), rows_csv(&artifacts.rows)?)];
    files.extend(artifacts.tables.iter().cloned());
    files.push(("summary.json".to_string(), json_bytes(&artifacts.summary)?));
    let checksums = write_files(&cfg.output_dir, &files)?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: name.to_string(),
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.to_toml_string()?.as_bytes()),
        started,
        finished: timestamp(),
        files: checksums,
    };
    write_files(&cfg.output_dir, &[("manifest.json".to_string(), json_bytes(&manifest)?)])?;
    Ok(RunOutcome {
        output_dir: cfg.output_dir.clone(),
        artifacts,
        manifest,
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Numerical(e.to_string()))
}

/// Computes the experiment's data without touching the file system.
pub fn compute(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let name = cfg.experiment.name();
    let seed = cfg.seed;
    let mut rows = Vec::new();
    let mut tables = Vec::new();
    let summary = match cfg.experiment {
        ExperimentKind::Correlation => {
            let kernel = cfg.kernel()?;
            let b = cfg.ising()?;
            let (alpha, lambda) = b.coupling()?;
            let horizon = *b.horizon.as_ref().expect("validated");
            let params = IsingParams::new(alpha, horizon, kernel.clone())?;
            let sets: Vec<Vec<f64>> = b.times.iter().map(|&t| vec![t]).collect();
            let est = estimate_correlations(&params, &sets, &b.run_settings(seed))?;
            for (t, e) in b.times.iter().zip(&est) {
                rows.push(
                    Row::from_estimate(name, "tau", e)
                        .kernel(&kernel.id())
                        .alpha(alpha)
                        .lambda(lambda)
                        .horizon(horizon)
                        .time(*t),
                );
            }
            json!({ "alpha": alpha, "lambda": lambda, "horizon": horizon, "times": b.times, "tau": est })
        }
        ExperimentKind::Susceptibility => {
            let kernel = cfg.kernel()?;
            let b = cfg.ising()?;
            let (alpha, lambda) = b.coupling()?;
            let horizon = *b.horizon.as_ref().expect("validated");
            let params = IsingParams::new(alpha, horizon, kernel.clone())?;
            let e = estimate_susceptibility(&params, &b.run_settings(seed))?;
            rows.push(
                Row::from_estimate(name, "susceptibility", &e)
                    .kernel(&kernel.id())
                    .alpha(alpha)
                    .lambda(lambda)
                    .horizon(horizon),
            );
            json!({ "alpha": alpha, "lambda": lambda, "horizon": horizon, "susceptibility": e })
        }
        ExperimentKind::RhoRatio => {
            let kernel = cfg.kernel()?;
            let b = cfg.ising()?;
            let (alpha, lambda) = b.coupling()?;
            let lambda = lambda.unwrap_or_else(|| (8.0 * alpha).sqrt());
            let report = estimate_rho_ratio(lambda, &kernel, &b.horizons, &b.run_settings(seed))?;
            let bound = overlap_upper_bound(lambda, &kernel)?;
            let base = |obs: &str, e| {
                Row::from_estimate(name, obs, e)
                    .kernel(&kernel.id())
                    .alpha(alpha)
                    .lambda(Some(lambda))
            };
            for ((t, r), rho) in report.horizons.iter().zip(&report.ratios).zip(&report.rho) {
                rows.push(base("partition_ratio", r).horizon(*t));
                rows.push(base("rho", rho).horizon(*t));
            }
            if let Some(p) = &report.plateau {
                rows.push(base("rho_plateau", p));
            }
            rows.push(
                Row::new(name, "overlap_upper_bound", bound)
                    .kernel(&kernel.id())
                    .alpha(alpha)
                    .lambda(Some(lambda)),
            );
            json!({ "report": report, "overlap_upper_bound": bound })
        }
        ExperimentKind::RhoSeries => {
            let kernel = cfg.kernel()?;
            let b = cfg.ising()?;
            let (alpha, lambda) = b.coupling()?;
            let lambda = lambda.unwrap_or_else(|| (8.0 * alpha).sqrt());
            let mut settings = SeriesSettings::new(*b.n_max.as_ref().expect("validated"), b.run_settings(seed));
            settings.t_max = b.t_max;
            if let Some(n) = b.nodes {
                settings.nodes = n;
            }
            let report = estimate_rho_series(lambda, &kernel, &settings)?;
            let base = |obs: &str, e| {
                Row::from_estimate(name, obs, e)
                    .kernel(&kernel.id())
                    .alpha(alpha)
                    .lambda(Some(lambda))
                    .horizon(report.t_max)
            };
            for (k, term) in report.terms.iter().enumerate() {
                rows.push(base(&format!("series_term_{}", k + 1), term));
            }
            rows.push(base("series_sum", &report.sum));
            rows.push(base("rho_series_upper", &report.rho_upper));
            for (t, v) in report.first_order_horizons.iter().zip(&report.first_order_values) {
                rows.push(base("first_order_integral", v).horizon(*t));
            }
            let mut v = to_value(&report)?;
            v["first_order_label"] = json!(report.first_order_class.label());
            v
        }
        ExperimentKind::PercolationTwoPoint => {
            let kernel = cfg.kernel()?;
            let p = cfg.percolation()?;
            let mut out = Vec::new();
            for (i, &alpha) in p.alpha_list().iter().enumerate() {
                for (j, &t) in p.times.iter().enumerate() {
                    let e = continuum_two_point(alpha, p.horizon, &kernel, 0.0, t, p.samples, sub_seed(seed, i as u64, j as u64))?;
                    rows.push(
                        Row::from_estimate(name, "continuum_two_point", &e)
                            .kernel(&kernel.id())
                            .alpha(alpha)
                            .horizon(p.horizon)
                            .time(t),
                    );
                    out.push(json!({ "alpha": alpha, "t": t, "continuum": e }));
                }
                for (k, &per_unit) in p.n_list.iter().enumerate() {
                    let intervals = grid_index(p.horizon, per_unit, "percolation.horizon")?;
                    let model = LatticeModel::new(p.horizon, intervals, alpha, kernel.clone())?;
                    for (j, &t) in p.times.iter().enumerate() {
                        let site = grid_index(t, per_unit, "percolation.times")?;
                        let s = sub_seed(stream_seed(seed, (k + 1) as u64), i as u64, j as u64);
                        let e = bond_percolation_two_point(&model, 0, site, p.samples, s)?;
                        rows.push(
                            Row::from_estimate(name, "discrete_two_point", &e)
                                .kernel(&kernel.id())
                                .alpha(alpha)
                                .horizon(p.horizon)
                                .grid(per_unit)
                                .time(t),
                        );
                        out.push(json!({ "alpha": alpha, "t": t, "N": per_unit, "discrete": e }));
                    }
                }
            }
            json!({ "horizon": p.horizon, "results": out })
        }
        ExperimentKind::LroScan => {
            let kernel = cfg.kernel()?;
            let p = cfg.percolation()?;
            let settings = LroSettings {
                alphas: p.alphas.clone(),
                t_grid: p.times.clone(),
                horizon: p.horizon,
                run: cfg.ising()?.run_settings(seed),
                percolation_samples: p.samples,
            };
            let report = long_range_order_scan(&kernel, &settings, seed)?;
            for entry in &report.entries {
                for (k, t) in report.t_grid.iter().enumerate() {
                    rows.push(
                        Row::from_estimate(name, "tau", &entry.tau[k])
                            .kernel(&kernel.id())
                            .alpha(entry.alpha)
                            .horizon(p.horizon)
                            .time(*t),
                    );
                    if let Some(e) = entry.percolation.get(k) {
                        rows.push(
                            Row::from_estimate(name, "percolation_lower_bound", e)
                                .kernel(&kernel.id())
                                .alpha(entry.alpha)
                                .horizon(p.horizon)
                                .time(*t),
                        );
                    }
                }
            }
            json!({
                "scan": report.summary(),
                "crossover": report.crossover,
                "threshold": report.threshold,
                "conventions": report.conventions,
            })
        }
        ExperimentKind::AppendixConvergence => {
            let kernel = cfg.kernel()?;
            let p = cfg.percolation()?;
            let alpha = *p.alpha.as_ref().expect("validated");
            let n = *p.n.as_ref().expect("validated");
            let table = appendix_convergence_experiment(alpha, p.horizon, &kernel, n, &p.n_list, p.samples, seed)?;
            let base = |obs: &str, e| {
                Row::from_estimate(name, obs, e)
                    .kernel(&kernel.id())
                    .alpha(alpha)
                    .horizon(p.horizon)
                    .time(n as f64)
            };
            rows.push(base("continuum_two_point", &table.continuum));
            if let Some(c) = table.continuum_exact {
                rows.push(
                    Row::new(name, "continuum_exact", c)
                        .kernel(&kernel.id())
                        .alpha(alpha)
                        .horizon(p.horizon)
                        .time(n as f64),
                );
            }
            for r in &table.rows {
                rows.push(base("discrete_two_point", &r.discrete).grid(r.n_per_unit));
                let mut gap = Row::new(name, "gap", r.gap)
                    .kernel(&kernel.id())
                    .alpha(alpha)
                    .horizon(p.horizon)
                    .grid(r.n_per_unit)
                    .time(n as f64);
                gap.stderr = Some(r.gap_stderr);
                rows.push(gap);
                if let Some(c) = r.closed_form {
                    rows.push(
                        Row::new(name, "closed_form", c)
                            .kernel(&kernel.id())
                            .alpha(alpha)
                            .horizon(p.horizon)
                            .grid(r.n_per_unit)
                            .time(n as f64),
                    );
                }
            }
            to_value(&table)?
        }
        ExperimentKind::FockValidate => {
            let f = cfg.fock()?;
            let modes: Vec<(f64, f64)> = f.modes.iter().map(|m| (m.freq, m.coupling)).collect();
            let cutoffs = f.cutoffs();
            let top = *cutoffs.iter().max().expect("validated");
            let mut fock_rows = Vec::new();
            let mut out = Vec::new();
            for (i, &lambda) in f.lambda_list().iter().enumerate() {
                let model = TruncatedModel::new(&modes, top, lambda)?;
                let table = cutoff_convergence(&model, &cutoffs)?;
                for r in &table.rows {
                    for (obs, v) in [("energy", r.energy), ("rho", r.rho), ("gap", r.gap)] {
                        rows.push(Row::new(name, obs, v).lambda(Some(lambda)).alpha(model.alpha()).grid(r.n_max));
                    }
                    fock_rows.push(FockRow {
                        lambda,
                        n_max: r.n_max,
                        energy: r.energy,
                        rho: r.rho,
                        gap: r.gap,
                    });
                }
                let bound = match model.kernel() {
                    Ok(k) => Some(overlap_upper_bound(lambda, &k)?),
                    Err(_) => None,
                };
                let mut checks = Vec::new();
                for (j, &t) in f.horizons.iter().enumerate() {
                    let exact = semigroup_overlap(&model, t)?;
                    rows.push(
                        Row::new(name, "semigroup_overlap", exact)
                            .lambda(Some(lambda))
                            .alpha(model.alpha())
                            .grid(top)
                            .horizon(t),
                    );
                    if let Some(n) = f.fk_samples {
                        let rep = feynman_kac_check(&model, t, n, sub_seed(seed, i as u64, j as u64))?;
                        rows.push(
                            Row::from_estimate(name, "partition_function_mc", &rep.monte_carlo)
                                .kernel(&model.kernel()?.id())
                                .lambda(Some(lambda))
                                .alpha(model.alpha())
                                .horizon(t),
                        );
                        checks.push(rep);
                    }
                }
                out.push(json!({
                    "lambda": lambda,
                    "cutoffs": table,
                    "overlap_upper_bound": bound,
                    "feynman_kac": checks,
                }));
            }
            tables.push(("fock.csv".to_string(), csv_bytes(&fock_rows)?));
            json!({ "results": out })
        }
        ExperimentKind::FkIdentity => {
            let kernel = cfg.kernel()?;
            let d = cfg.discrete()?;
            let (alpha, lambda) = d.coupling()?;
            let mut max_dev: f64 = 0.0;
            let mut out = Vec::new();
            for n in d.grid_sizes() {
                let model = LatticeModel::new(d.horizon, n, alpha, kernel.clone())?;
                for &[a, b] in &d.sites {
                    let spin = exact_correlation(&model, &[a, b])?;
                    let fk = exact_fk_two_point(&model, a, b)?;
                    max_dev = max_dev.max((spin - fk).abs());
                    let t = (b as f64 - a as f64).abs() * model.delta();
                    for (obs, v) in [("spin_correlation", spin), ("fk_two_point", fk)] {
                        rows.push(
                            Row::new(name, obs, v)
                                .kernel(&kernel.id())
                                .alpha(alpha)
                                .lambda(lambda)
                                .horizon(d.horizon)
                                .grid(n)
                                .time(t),
                        );
                    }
                    out.push(json!({ "N": n, "a": a, "b": b, "spin": spin, "fk": fk }));
                }
            }
            json!({ "pairs": out, "max_abs_deviation": max_dev })
        }
    };
    Ok(Artifacts { rows, summary, tables })
}

/// `x · per_unit` as an exact grid index.
fn grid_index(x: f64, per_unit: usize, field: &str) -> Result<usize> {
    let v = x * per_unit as f64;
    let r = v.round();
    if (v - r).abs() > 1e-9 || r < 0.0 {
        return Err(Error::config(field, format!("{x} is not on the grid of spacing 1/{per_unit}")));
    }
    Ok(r as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fk_identity_run_is_exact() {
        let text = r#"
schema_version = 1
experiment = "fk_identity"
seed = 1
[kernel]
type = "poly"
amplitude = 1.0
[discrete]
alpha = 0.7
horizon = 1.0
n = 4
sites = [[0, 3], [1, 4]]
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let a = compute(&cfg).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert!(a.summary["max_abs_deviation"].as_f64().unwrap() < 1e-12);
    }

    #[test]
    fn grid_index_checks_alignment() {
        assert_eq!(grid_index(1.5, 4, "x").unwrap(), 6);
        assert!(grid_index(0.3, 4, "x").is_err());
    }
}
