//! Result-file writers. Every file embeds the schema version and the full
//! resolved configuration: CSVs as leading `#` comment lines, JSON as
//! fields. Nothing here depends on wall-clock time, so identical inputs
//! produce byte-identical files.

use std::fs;
use std::path::Path;

use cellfree_core::metrics::EmpiricalCdf;
use serde_json::json;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn config_comments(echo: &serde_json::Value) -> Vec<String> {
    vec![
        format!("schema_version = {SCHEMA_VERSION}"),
        format!("config = {echo}"),
    ]
}

pub fn write_csv(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut buf = Vec::new();
    for line in comments {
        buf.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let buf = w
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv buffer: {e}")))?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Everything the CDF sidecar records next to the curve itself.
pub struct CdfMeta<'a> {
    pub scenario: &'a str,
    pub method: &'a str,
    /// Which per-realization statistic the samples are, e.g. `min_user_sinr_db`.
    pub statistic: &'a str,
    pub outage_fraction: f64,
    pub sinr_targets_db: Vec<f64>,
    pub relaxation_factor: f64,
    pub config_echo: &'a serde_json::Value,
}

/// Writes the empirical CDF of `samples_db` as a two-column CSV plus a JSON
/// sidecar. Refuses empty input before creating either file.
pub fn export_cdf(
    samples_db: &[f64],
    csv_path: &Path,
    sidecar_path: &Path,
    meta: &CdfMeta,
) -> Result<()> {
    let cdf = EmpiricalCdf::from_samples(samples_db).ok_or_else(|| {
        CliError::Config(format!(
            "cdf export for {}/{} has no samples",
            meta.scenario, meta.method
        ))
    })?;
    let rows: Vec<Vec<String>> = cdf
        .points()
        .iter()
        .map(|&(x, f)| vec![format!("{x}"), format!("{f}")])
        .collect();
    write_csv(
        csv_path,
        &config_comments(meta.config_echo),
        &["sinr_db", "cdf"],
        &rows,
    )?;
    write_json(
        sidecar_path,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": meta.scenario,
            "method": meta.method,
            "statistic": meta.statistic,
            "outage_fraction": meta.outage_fraction,
            "sinr_targets_db": meta.sinr_targets_db,
            "relaxation_factor": meta.relaxation_factor,
            "n_samples": cdf.num_samples(),
            "config": meta.config_echo,
        }),
    )
}
