//! Result persistence: schema-versioned `summary.json`, fixed-header
//! `raw.csv`, and plot scripts, all written atomically (temp file + rename).
//! Every summary embeds the seed and a hash of the canonical config so a
//! verifier can re-hash and match.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use sysid_core::experiments::TrialRecord;
use sysid_core::matrix::Mat;
use sysid_core::{Error, Result};

use crate::config::ConfigFile;

pub const SCHEMA_VERSION: u32 = 1;
pub const RAW_CSV_HEADER: &str = "T,trial,error,lambda_min_YT,selfnorm";

/// Canonical hash of a config: sha256 over the sorted-key JSON rendering.
pub fn config_hash(cfg: &ConfigFile) -> String {
    // serde_json::Value objects are BTreeMaps, so this rendering is
    // key-sorted and canonical regardless of struct field order
    let value = serde_json::to_value(cfg).expect("config serializes");
    let text = serde_json::to_string(&value).expect("value serializes");
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: Value,
    pub results: Value,
}

impl Summary {
    pub fn new(experiment: &str, seed: u64, cfg: &ConfigFile, results: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            seed,
            config_hash: config_hash(cfg),
            config: serde_json::to_value(cfg).expect("config serializes"),
            results,
        }
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        String::new()
    } else {
        format!("{v}") // inf / -inf, spelled out
    }
}

/// Write `summary.json`, `raw.csv` and the plot pair into `dir`; returns the
/// paths written. Re-running with identical inputs produces byte-identical
/// files.
pub fn write_outputs(
    dir: &Path,
    summary: &Summary,
    raw: &[TrialRecord],
    plot: Option<&crate::plot::PlotSpec>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let summary_path = dir.join("summary.json");
    let mut bytes = serde_json::to_vec_pretty(summary)
        .map_err(|e| Error::Numeric(format!("summary serialization: {e}")))?;
    bytes.push(b'\n');
    atomic_write(&summary_path, &bytes)?;
    written.push(summary_path);

    let raw_path = dir.join("raw.csv");
    let mut csv = String::with_capacity(raw.len() * 48 + 64);
    csv.push_str(RAW_CSV_HEADER);
    csv.push('\n');
    for row in raw {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.t,
            row.trial,
            fmt_opt(row.error),
            fmt_opt(row.lambda_min_yt),
            fmt_opt(row.selfnorm)
        ));
    }
    atomic_write(&raw_path, csv.as_bytes())?;
    written.push(raw_path);

    if let Some(spec) = plot {
        let gp_path = dir.join("plot.gp");
        atomic_write(&gp_path, crate::plot::gnuplot_script(spec).as_bytes())?;
        written.push(gp_path);
        let svg_path = dir.join("plot.svg");
        atomic_write(&svg_path, crate::plot::render_svg(spec).as_bytes())?;
        written.push(svg_path);
    }

    Ok(written)
}

/// Re-hash the config embedded in a summary on disk and compare with its
/// recorded hash.
pub fn verify_outputs(dir: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(dir.join("summary.json"))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("summary.json: {e}")))?;
    let recorded = value
        .get("config_hash")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Missing("config_hash field".into()))?;
    let config = value
        .get("config")
        .ok_or_else(|| Error::Missing("config field".into()))?;
    let text = serde_json::to_string(config).expect("value serializes");
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(digest == recorded)
}

/// Matrix as nested JSON arrays (row major).
pub fn matrix_to_json(m: &Mat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| serde_json::json!(m[(i, j)]))
                        .collect(),
                )
            })
            .collect(),
    )
}
