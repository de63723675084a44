//! Subcommand drivers. `run` and `compare` execute every method of a
//! scenario on the same seeded channel draws (realization index i uses the
//! same fading for all methods, so comparisons are paired); `comm` writes
//! the fronthaul accounting tables and cross-checks them against a driven
//! protocol run; `sweep` grids the distributed method over the target,
//! relaxation factor, penalty, and AP count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use cellfree_core::admm;
use cellfree_core::baseline::{self, PowerAllocation};
use cellfree_core::centralized::solve_centralized;
use cellfree_core::conic::SolveStatus;
use cellfree_core::metrics::{self, EnsembleStats, MethodOutcome};
use cellfree_core::model::{generate_channels, linear_to_db, ChannelRealization};
use cellfree_core::netsim::{self, comm_volume, Direction, Scheme};
use cellfree_core::SystemConfig;
use serde_json::json;

use crate::config::{ExperimentSpec, Method, ParsedConfig};
use crate::error::{CliError, Result};
use crate::output::{config_comments, export_cdf, write_csv, write_json, CdfMeta, SCHEMA_VERSION};

pub const RESULTS_HEADER: [&str; 8] = [
    "scenario",
    "method",
    "realization",
    "min_sinr_db",
    "mean_sinr_db",
    "total_power_db",
    "iterations",
    "converged",
];

pub const COMM_HEADER: [&str; 4] = [
    "scheme",
    "per_exchange_scalars",
    "per_iteration_bytes",
    "total_bytes",
];

pub const SWEEP_HEADER: [&str; 9] = [
    "num_aps",
    "sinr_target_db",
    "relaxation_factor",
    "penalty",
    "n_realizations",
    "outage_fraction",
    "median_total_power_db",
    "converged_fraction",
    "mean_iterations",
];

fn scheme_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Centralized => "centralized",
        Scheme::AdmmCellFree => "admm_cell_free",
        Scheme::AdmmCellular => "admm_cellular",
    }
}

/// One realization of one method. Conjugate beamforming has no target to
/// solve for; it reports the best equal-split grid point (highest min-user
/// SINR, ties to the lowest power) with iterations = 0.
fn run_method(
    method: Method,
    h: &ChannelRealization,
    cfg: &SystemConfig,
) -> cellfree_core::Result<MethodOutcome> {
    match method {
        Method::Centralized => {
            let r = solve_centralized(h, cfg)?;
            Ok(MethodOutcome {
                precoder: r.precoder,
                iterations: r.iterations,
                converged: r.status == SolveStatus::Optimal,
            })
        }
        Method::Admm => {
            let r = admm::run_admm(h, cfg)?;
            Ok(MethodOutcome {
                precoder: r.precoder,
                iterations: r.iterations_used,
                converged: r.converged,
            })
        }
        Method::Conjugate => {
            let grid = baseline::default_power_grid(cfg.noise_power(0));
            let sweep = baseline::max_sinr_under_conjugate(h, cfg, &grid)?;
            let alloc = PowerAllocation::equal_split(
                sweep.best_total_power,
                cfg.num_aps(),
                cfg.num_users(),
            )?;
            Ok(MethodOutcome {
                precoder: baseline::conjugate_precoder(h, &alloc)?,
                iterations: 0,
                converged: true,
            })
        }
    }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn run_experiments(parsed: &ParsedConfig, compare: bool) -> Result<Vec<(String, String)>> {
    if parsed.experiments.is_empty() {
        return Err(CliError::Config("no [[experiment]] blocks in config".into()));
    }
    let mut failed = Vec::new();
    for spec in &parsed.experiments {
        match run_one(spec, &parsed.output_dir, compare) {
            Ok(()) => println!("scenario {}: ok", spec.name),
            Err(e) => {
                eprintln!("scenario {}: {e}", spec.name);
                failed.push((spec.name.clone(), e.to_string()));
            }
        }
    }
    Ok(failed)
}

fn run_one(spec: &ExperimentSpec, out_root: &Path, compare: bool) -> Result<()> {
    if compare && spec.methods.len() < 2 {
        return Err(CliError::Config(format!(
            "compare wants at least 2 methods, scenario {:?} lists {}",
            spec.name,
            spec.methods.len()
        )));
    }
    let dir = out_root.join(&spec.name);
    fs::create_dir_all(&dir)?;
    let echo = spec.echo();
    let comments = config_comments(&echo);

    let mut rows = Vec::new();
    let mut per_method: Vec<(Method, EnsembleStats)> = Vec::new();
    for &method in &spec.methods {
        let stats = metrics::ensemble(&spec.config, spec.n_realizations, |h, c| {
            run_method(method, h, c)
        })?;
        for s in &stats.samples {
            rows.push(vec![
                spec.name.clone(),
                method.as_str().to_string(),
                s.realization_index.to_string(),
                format!("{}", s.report.min_sinr_db),
                format!("{}", s.report.mean_sinr_db),
                format!("{}", linear_to_db(s.total_power)),
                s.iterations.to_string(),
                s.converged.to_string(),
            ]);
        }
        per_method.push((method, stats));
    }
    write_csv(&dir.join("results.csv"), &comments, &RESULTS_HEADER, &rows)?;

    for (method, stats) in &per_method {
        for (tag, samples) in [
            (
                "min",
                stats
                    .samples
                    .iter()
                    .map(|s| s.report.min_sinr_db)
                    .collect::<Vec<f64>>(),
            ),
            (
                "mean",
                stats
                    .samples
                    .iter()
                    .map(|s| s.report.mean_sinr_db)
                    .collect::<Vec<f64>>(),
            ),
        ] {
            let meta = CdfMeta {
                scenario: &spec.name,
                method: method.as_str(),
                statistic: if tag == "min" {
                    "min_user_sinr_db"
                } else {
                    "mean_user_sinr_db"
                },
                outage_fraction: stats.outage_fraction,
                sinr_targets_db: spec
                    .config
                    .sinr_targets()
                    .iter()
                    .map(|&g| linear_to_db(g))
                    .collect(),
                relaxation_factor: spec.config.relaxation_factor(),
                config_echo: &echo,
            };
            let base = format!("cdf_{tag}_{}", method.as_str());
            export_cdf(
                &samples,
                &dir.join(format!("{base}.csv")),
                &dir.join(format!("{base}.json")),
                &meta,
            )?;
        }
    }

    let failures: Vec<serde_json::Value> = per_method
        .iter()
        .flat_map(|(m, stats)| {
            stats.failures.iter().map(move |(idx, err)| {
                json!({ "method": m.as_str(), "realization": idx, "error": err })
            })
        })
        .collect();
    if !failures.is_empty() {
        write_json(
            &dir.join("failures.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "scenario": spec.name,
                "failures": failures,
                "config": echo,
            }),
        )?;
    }

    if spec.methods.contains(&Method::Admm) {
        let h0 = generate_channels(&spec.config, 0);
        let res = admm::run_admm(&h0, &spec.config)?;
        write_json(
            &dir.join("trace_admm.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "scenario": spec.name,
                "realization_index": 0,
                "iterations_used": res.iterations_used,
                "converged": res.converged,
                "total_power_db": linear_to_db(res.total_power),
                "trace": res.trace,
                "config": echo,
            }),
        )?;
    }

    if compare {
        write_json(
            &dir.join("summary.json"),
            &compare_summary(spec, &per_method, &echo),
        )?;
    }
    Ok(())
}

fn compare_summary(
    spec: &ExperimentSpec,
    per_method: &[(Method, EnsembleStats)],
    echo: &serde_json::Value,
) -> serde_json::Value {
    let mut methods = serde_json::Map::new();
    for (m, stats) in per_method {
        let n = stats.samples.len().max(1) as f64;
        methods.insert(
            m.as_str().to_string(),
            json!({
                "outage_fraction": stats.outage_fraction,
                "converged_fraction":
                    stats.samples.iter().filter(|s| s.converged).count() as f64 / n,
                "mean_iterations":
                    stats.samples.iter().map(|s| s.iterations).sum::<usize>() as f64 / n,
                "median_total_power_db": median(
                    stats.samples.iter().map(|s| linear_to_db(s.total_power)).collect()
                ),
                "median_min_sinr_db": median(
                    stats.samples.iter().map(|s| s.report.min_sinr_db).collect()
                ),
                "n_failures": stats.failures.len(),
            }),
        );
    }
    let mut pairs = Vec::new();
    for i in 0..per_method.len() {
        for j in i + 1..per_method.len() {
            let (ma, sa) = &per_method[i];
            let (mb, sb) = &per_method[j];
            let by_index: BTreeMap<u64, f64> = sb
                .samples
                .iter()
                .map(|s| (s.realization_index, s.total_power))
                .collect();
            let mut below = 0usize;
            let mut paired = 0usize;
            let mut gaps = Vec::new();
            for s in &sa.samples {
                if let Some(&pb) = by_index.get(&s.realization_index) {
                    paired += 1;
                    if s.total_power <= pb * (1.0 + 1e-9) {
                        below += 1;
                    }
                    gaps.push(linear_to_db(pb) - linear_to_db(s.total_power));
                }
            }
            pairs.push(json!({
                "first": ma.as_str(),
                "second": mb.as_str(),
                "paired_realizations": paired,
                "fraction_first_power_le_second":
                    if paired == 0 { None } else { Some(below as f64 / paired as f64) },
                "median_power_gap_db": median(gaps),
            }));
        }
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": spec.name,
        "n_realizations": spec.n_realizations,
        "methods": methods,
        "pairs": pairs,
        "config": echo,
    })
}

pub fn comm_tables(parsed: &ParsedConfig) -> Result<Vec<(String, String)>> {
    if parsed.experiments.is_empty() {
        return Err(CliError::Config("no [[experiment]] blocks in config".into()));
    }
    let mut failed = Vec::new();
    for spec in &parsed.experiments {
        match comm_one(spec, &parsed.output_dir) {
            Ok(()) => println!("scenario {}: ok", spec.name),
            Err(e) => {
                eprintln!("scenario {}: {e}", spec.name);
                failed.push((spec.name.clone(), e.to_string()));
            }
        }
    }
    Ok(failed)
}

fn comm_one(spec: &ExperimentSpec, out_root: &Path) -> Result<()> {
    let dir = out_root.join(&spec.name);
    fs::create_dir_all(&dir)?;
    let cfg = &spec.config;
    let (m, n, k) = (cfg.num_aps(), cfg.num_antennas(), cfg.num_users());
    let echo = spec.echo();

    let mut rows = Vec::new();
    for scheme in [Scheme::Centralized, Scheme::AdmmCellFree, Scheme::AdmmCellular] {
        let v = comm_volume(scheme, m, n, k, cfg.max_iters());
        rows.push(vec![
            scheme_name(scheme).to_string(),
            v.per_exchange_scalars.to_string(),
            v.per_exchange_bytes.to_string(),
            v.total_bytes.to_string(),
        ]);
    }
    write_csv(
        &dir.join("comm.csv"),
        &config_comments(&echo),
        &COMM_HEADER,
        &rows,
    )?;

    // The table is formula-based; drive one actual consensus run and the
    // canned centralized exchange and require byte-exact agreement.
    let h0 = generate_channels(cfg, 0);
    let (res, log) = netsim::run_distributed_protocol(&h0, cfg)?;
    let formula = comm_volume(Scheme::AdmmCellFree, m, n, k, res.iterations_used);
    let uplink = log.bytes_in(Direction::Uplink);
    let downlink = log.bytes_in(Direction::Downlink);
    let admm_matches = uplink == formula.total_bytes
        && downlink == formula.broadcast_bytes_per_iteration * res.iterations_used;

    let cent_log = netsim::centralized_exchange_log(m, n, k);
    let cent = comm_volume(Scheme::Centralized, m, n, k, 1);
    let cent_matches = cent_log.bytes_in(Direction::Uplink) == cent.total_bytes
        && cent_log.bytes_in(Direction::Downlink) == cent.precoder_download_bytes;

    write_json(
        &dir.join("comm_check.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": spec.name,
            "driven_iterations": res.iterations_used,
            "driven_uplink_bytes": uplink,
            "driven_downlink_bytes": downlink,
            "formula_uplink_bytes": formula.total_bytes,
            "formula_downlink_bytes":
                formula.broadcast_bytes_per_iteration * res.iterations_used,
            "admm_matches": admm_matches,
            "centralized_upload_bytes": cent_log.bytes_in(Direction::Uplink),
            "centralized_download_bytes": cent_log.bytes_in(Direction::Downlink),
            "centralized_matches": cent_matches,
            "config": echo,
        }),
    )?;
    if !admm_matches || !cent_matches {
        return Err(CliError::Config(format!(
            "fronthaul accounting mismatch in scenario {:?}",
            spec.name
        )));
    }
    Ok(())
}

pub fn sweep(parsed: &ParsedConfig) -> Result<()> {
    let grid = parsed
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    fs::create_dir_all(&parsed.output_dir)?;

    let mut rows = Vec::new();
    for (point, cfg) in &grid.points {
        let stats = metrics::ensemble(cfg, grid.n_realizations, |h, c| {
            run_method(Method::Admm, h, c)
        })?;
        let n = stats.samples.len().max(1) as f64;
        let med_power = median(
            stats
                .samples
                .iter()
                .map(|s| linear_to_db(s.total_power))
                .collect(),
        );
        rows.push(vec![
            point.num_aps.to_string(),
            format!("{}", point.sinr_target_db),
            format!("{}", point.relaxation_factor),
            format!("{}", point.penalty),
            grid.n_realizations.to_string(),
            format!("{}", stats.outage_fraction),
            med_power.map_or_else(String::new, |v| format!("{v}")),
            format!(
                "{}",
                stats.samples.iter().filter(|s| s.converged).count() as f64 / n
            ),
            format!(
                "{}",
                stats.samples.iter().map(|s| s.iterations).sum::<usize>() as f64 / n
            ),
        ]);
    }

    let points: Vec<&crate::config::SweepPoint> = grid.points.iter().map(|(p, _)| p).collect();
    let echo = json!({
        "sweep": { "n_realizations": grid.n_realizations, "grid": points },
        "system_at_first_point": grid.points.first().map(|(_, cfg)| cfg),
    });
    write_csv(
        &parsed.output_dir.join("sweep.csv"),
        &config_comments(&echo),
        &SWEEP_HEADER,
        &rows,
    )?;
    println!("sweep: {} grid points", grid.points.len());
    Ok(())
}
