//! CSV rows, JSON summaries and the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stats::Estimate;

/// Column order of every data CSV.
pub const CSV_COLUMNS: [&str; 13] = [
    "experiment", "observable", "kernel_id", "alpha", "lambda", "T", "N", "t", "mean", "stderr", "n", "tau_int",
    "seed",
];

/// One observable value. Fields that do not apply stay empty in the CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub observable: String,
    pub kernel_id: Option<String>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Grid size: points per unit time, or the Fock cutoff.
    #[serde(rename = "N")]
    pub grid: Option<usize>,
    pub t: Option<f64>,
    pub mean: f64,
    pub stderr: Option<f64>,
    pub n: Option<usize>,
    pub tau_int: Option<f64>,
    pub seed: Option<u64>,
}

impl Row {
    pub fn new(experiment: &str, observable: &str, mean: f64) -> Self {
        Row {
            experiment: experiment.to_string(),
            observable: observable.to_string(),
            mean,
            ..Row::default()
        }
    }

    pub fn from_estimate(experiment: &str, observable: &str, e: &Estimate) -> Self {
        Row {
            stderr: Some(e.stderr),
            n: Some(e.n_samples),
            tau_int: Some(e.autocorrelation_time),
            seed: Some(e.seed),
            ..Row::new(experiment, observable, e.mean)
        }
    }

    pub fn kernel(mut self, id: &str) -> Self {
        self.kernel_id = Some(id.to_string());
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn lambda(mut self, lambda: Option<f64>) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn horizon(mut self, t: f64) -> Self {
        self.horizon = Some(t);
        self
    }

    pub fn grid(mut self, n: usize) -> Self {
        self.grid = Some(n);
        self
    }

    pub fn time(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Serializes records with a header row.
pub fn csv_bytes<T: Serialize>(records: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Data CSV with the fixed header, also when there are no rows.
pub fn rows_csv(rows: &[Row]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(format!("{}\n", CSV_COLUMNS.join(",")).into_bytes());
    }
    csv_bytes(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|x| x.map_err(csv_error)).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileChecksum {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: String,
    pub seed: u64,
    /// Hash of the normalized config.
    pub config_sha256: String,
    pub started: String,
    pub finished: String,
    pub files: Vec<FileChecksum>,
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes `files` into `dir` and returns their checksums.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<FileChecksum>> {
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, bytes)| {
            std::fs::write(dir.join(name), bytes)?;
            Ok(FileChecksum {
                path: name.clone(),
                sha256: sha256_hex(bytes),
            })
        })
        .collect()
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    v.push(b'\n');
    Ok(v)
}
