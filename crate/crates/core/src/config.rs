//! Experiment configuration files (TOML, schema version 1).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::BosonMode;
use crate::ising_continuum::alpha_from_lambda;
use crate::kernel::{Kernel, SpectralData};
use crate::stats::RunSettings;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Correlation,
    RhoRatio,
    RhoSeries,
    Susceptibility,
    PercolationTwoPoint,
    LroScan,
    AppendixConvergence,
    FockValidate,
    FkIdentity,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Correlation => "correlation",
            ExperimentKind::RhoRatio => "rho_ratio",
            ExperimentKind::RhoSeries => "rho_series",
            ExperimentKind::Susceptibility => "susceptibility",
            ExperimentKind::PercolationTwoPoint => "percolation_two_point",
            ExperimentKind::LroScan => "lro_scan",
            ExperimentKind::AppendixConvergence => "appendix_convergence",
            ExperimentKind::FockValidate => "fock_validate",
            ExperimentKind::FkIdentity => "fk_identity",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_chains() -> usize {
    4
}

fn is_default_chains(c: &usize) -> bool {
    *c == default_chains()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Caps the worker threads; the environment variable takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<SpectralData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ising: Option<IsingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percolation: Option<PercolationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub sweeps: usize,
    pub burn_in: usize,
    #[serde(default = "default_chains", skip_serializing_if = "is_default_chains")]
    pub chains: usize,
    /// Correlation times `t` for `E[X_0 X_t]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
    /// Horizons for the partition-ratio sequence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<f64>,
    /// Series truncation order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub horizon: f64,
    /// Number of grid intervals; alternatively `n_list`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    /// Site pairs `[a, b]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sites: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolationBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
    pub horizon: f64,
    /// Target distance for the appendix experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Grid points per unit time.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_list: Vec<usize>,
    pub samples: usize,
    /// Two-point distances from 0, or the scan grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockBlock {
    pub modes: Vec<BosonMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_max_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    /// Horizons for the semigroup overlap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<f64>,
    /// Path samples for the Feynman–Kac comparison at each horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fk_samples: Option<usize>,
}

/// Resolves `alpha`/`lambda` (exactly one) into `(α, λ)`.
fn coupling(block: &str, alpha: Option<f64>, lambda: Option<f64>) -> Result<(f64, Option<f64>)> {
    let (a, l) = match (alpha, lambda) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                format!("{block}.alpha"),
                format!("both {block}.alpha and {block}.lambda are set; give exactly one (alpha = lambda^2/8)"),
            ))
        }
        (None, None) => {
            return Err(Error::config(
                format!("{block}.alpha"),
                format!("one of {block}.alpha or {block}.lambda is required"),
            ))
        }
        (Some(a), None) => (a, None),
        (None, Some(l)) => (alpha_from_lambda(l), Some(l)),
    };
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::config(format!("{block}.alpha"), format!("must be finite and >= 0, got {a}")));
    }
    Ok((a, l))
}

fn require<'a, T>(value: &'a Option<T>, field: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::config(field, "required for this experiment"))
}

fn require_nonempty<T>(value: &[T], field: &str) -> Result<()> {
    if value.is_empty() {
        return Err(Error::config(field, "must be a nonempty list"));
    }
    Ok(())
}

impl IsingBlock {
    /// `(α, λ)` with `λ` present only when it was given.
    pub fn coupling(&self) -> Result<(f64, Option<f64>)> {
        coupling("ising", self.alpha, self.lambda)
    }

    pub fn run_settings(&self, seed: u64) -> RunSettings {
        RunSettings::new(self.sweeps, self.burn_in, seed).with_chains(self.chains)
    }

    fn validate_run(&self) -> Result<()> {
        self.run_settings(0)
            .validate()
            .map_err(|e| Error::config("ising.sweeps", e.to_string()))
    }
}

impl DiscreteBlock {
    pub fn coupling(&self) -> Result<(f64, Option<f64>)> {
        coupling("discrete", self.alpha, self.lambda)
    }

    /// `n_list`, or `[n]`.
    pub fn grid_sizes(&self) -> Vec<usize> {
        match (self.n, self.n_list.is_empty()) {
            (Some(n), true) => vec![n],
            _ => self.n_list.clone(),
        }
    }
}

impl PercolationBlock {
    /// `alphas`, or `[alpha]`.
    pub fn alpha_list(&self) -> Vec<f64> {
        match (self.alpha, self.alphas.is_empty()) {
            (Some(a), true) => vec![a],
            _ => self.alphas.clone(),
        }
    }
}

impl FockBlock {
    pub fn cutoffs(&self) -> Vec<usize> {
        match (self.n_max, self.n_max_list.is_empty()) {
            (Some(n), true) => vec![n],
            _ => self.n_max_list.clone(),
        }
    }

    pub fn lambda_list(&self) -> Vec<f64> {
        match (self.lambda, self.lambdas.is_empty()) {
            (Some(l), true) => vec![l],
            _ => self.lambdas.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(error_field(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<serialize>", e.to_string()))
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let spec = require(&self.kernel, "kernel")?;
        Kernel::new(spec.clone()).map_err(|e| Error::config("kernel", e.to_string()))
    }

    pub fn ising(&self) -> Result<&IsingBlock> {
        require(&self.ising, "ising")
    }

    pub fn discrete(&self) -> Result<&DiscreteBlock> {
        require(&self.discrete, "discrete")
    }

    pub fn percolation(&self) -> Result<&PercolationBlock> {
        require(&self.percolation, "percolation")
    }

    pub fn fock(&self) -> Result<&FockBlock> {
        require(&self.fock, "fock")
    }

    /// Checks that the blocks the experiment needs are present and
    /// consistent.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be >= 1"));
        }
        use ExperimentKind::*;
        if self.experiment != FockValidate {
            self.kernel()?;
        }
        match self.experiment {
            Correlation | Susceptibility => {
                let b = self.ising()?;
                b.coupling()?;
                b.validate_run()?;
                require(&b.horizon, "ising.horizon")?;
                if self.experiment == Correlation {
                    require_nonempty(&b.times, "ising.times")?;
                }
            }
            RhoRatio => {
                let b = self.ising()?;
                b.coupling()?;
                b.validate_run()?;
                require_nonempty(&b.horizons, "ising.horizons")?;
            }
            RhoSeries => {
                let b = self.ising()?;
                b.coupling()?;
                b.validate_run()?;
                require(&b.n_max, "ising.n_max")?;
            }
            PercolationTwoPoint => {
                let p = self.percolation()?;
                require_nonempty(&p.alpha_list(), "percolation.alpha")?;
                require_nonempty(&p.times, "percolation.times")?;
            }
            LroScan => {
                let p = self.percolation()?;
                require_nonempty(&p.alphas, "percolation.alphas")?;
                require_nonempty(&p.times, "percolation.times")?;
                self.ising()?.validate_run()?;
            }
            AppendixConvergence => {
                let p = self.percolation()?;
                require(&p.alpha, "percolation.alpha")?;
                require(&p.n, "percolation.n")?;
                require_nonempty(&p.n_list, "percolation.n_list")?;
            }
            FockValidate => {
                let f = self.fock()?;
                require_nonempty(&f.modes, "fock.modes")?;
                require_nonempty(&f.cutoffs(), "fock.n_max")?;
                require_nonempty(&f.lambda_list(), "fock.lambda")?;
                if f.lambda.is_some() && !f.lambdas.is_empty() {
                    return Err(Error::config("fock.lambda", "both fock.lambda and fock.lambdas are set"));
                }
            }
            FkIdentity => {
                let d = self.discrete()?;
                d.coupling()?;
                require_nonempty(&d.grid_sizes(), "discrete.n")?;
                require_nonempty(&d.sites, "discrete.sites")?;
            }
        }
        Ok(())
    }
}

/// Best-effort name of the key a TOML error points at.
fn error_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    for marker in ["field `", "variant `"] {
        if let Some(i) = msg.find(marker) {
            let rest = &msg[i + marker.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "<config>".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
experiment = "correlation"
seed = 7

[kernel]
type = "modes"
modes = [{ weight = 1.0, freq = 1.0 }]

[ising]
alpha = 0.0
horizon = 4.0
sweeps = 2000
burn_in = 200
times = [0.5, 1.0, 2.0]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Correlation);
        assert_eq!(cfg.ising().unwrap().chains, 4);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn alpha_and_lambda_conflict() {
        let text = MINIMAL.replace("alpha = 0.0", "alpha = 0.0\nlambda = 1.0");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "ising.alpha");
                assert!(message.contains("alpha") && message.contains("lambda"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lambda_maps_to_alpha() {
        let text = MINIMAL.replace("alpha = 0.0", "lambda = 2.0");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.ising().unwrap().coupling().unwrap(), (0.5, Some(2.0)));
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 7\n", "");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "seed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_block_is_named() {
        let text = MINIMAL.replace("experiment = \"correlation\"", "experiment = \"fock_validate\"");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "fock"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("sweeps = 2000", "sweeps = 2000\nsweep = 3");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config { .. })));
    }
}
