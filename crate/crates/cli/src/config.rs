//! Experiment configuration: TOML schema, defaults, and resolution into
//! validated [`SystemConfig`] values.
//!
//! A file has up to four parts. `[system]` and `[admm]` set global knob
//! overrides, each `[[experiment]]` names a scenario (with optional nested
//! `system`/`admm` overrides of its own), and `[sweep]` lists grid axes for
//! the sweep subcommand. Every key is optional; unset keys fall back to the
//! built-in defaults (M=4, N=64, K=4, 20 dB links, 15 dB target, c=1,
//! rho=10, 10 iterations, 100 realizations, seed 42).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use cellfree_core::{SystemConfig, SystemConfigBuilder};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Centralized,
    Admm,
    Conjugate,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::Admm => "admm",
            Method::Conjugate => "conjugate",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemKeys {
    num_aps: Option<usize>,
    num_antennas: Option<usize>,
    num_users: Option<usize>,
    /// Per-link average channel gain over noise, dB.
    snr_db: Option<f64>,
    noise_power: Option<f64>,
    sinr_target_db: Option<f64>,
}

impl SystemKeys {
    /// Field-wise override: keys set in `over` win.
    fn merged(&self, over: &SystemKeys) -> SystemKeys {
        SystemKeys {
            num_aps: over.num_aps.or(self.num_aps),
            num_antennas: over.num_antennas.or(self.num_antennas),
            num_users: over.num_users.or(self.num_users),
            snr_db: over.snr_db.or(self.snr_db),
            noise_power: over.noise_power.or(self.noise_power),
            sinr_target_db: over.sinr_target_db.or(self.sinr_target_db),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdmmKeys {
    penalty: Option<f64>,
    relaxation_factor: Option<f64>,
    max_iters: Option<usize>,
    primal_tol: Option<f64>,
    dual_tol: Option<f64>,
    rel_tol: Option<f64>,
}

impl AdmmKeys {
    fn merged(&self, over: &AdmmKeys) -> AdmmKeys {
        AdmmKeys {
            penalty: over.penalty.or(self.penalty),
            relaxation_factor: over.relaxation_factor.or(self.relaxation_factor),
            max_iters: over.max_iters.or(self.max_iters),
            primal_tol: over.primal_tol.or(self.primal_tol),
            dual_tol: over.dual_tol.or(self.dual_tol),
            rel_tol: over.rel_tol.or(self.rel_tol),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentKeys {
    name: String,
    methods: Vec<Method>,
    n_realizations: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    system: SystemKeys,
    #[serde(default)]
    admm: AdmmKeys,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepKeys {
    num_aps: Option<Vec<usize>>,
    sinr_target_db: Option<Vec<f64>>,
    relaxation_factor: Option<Vec<f64>>,
    penalty: Option<Vec<f64>>,
    n_realizations: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    #[serde(default)]
    system: SystemKeys,
    #[serde(default)]
    admm: AdmmKeys,
    #[serde(default, rename = "experiment")]
    experiments: Vec<ExperimentKeys>,
    sweep: Option<SweepKeys>,
}

/// One fully resolved scenario: which methods run, on how many seeded
/// realizations, under which validated system description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub methods: Vec<Method>,
    pub n_realizations: usize,
    pub config: SystemConfig,
}

impl ExperimentSpec {
    /// The resolved-config echo every result file embeds.
    pub fn echo(&self) -> serde_json::Value {
        json!({
            "scenario": self.name,
            "methods": self.methods,
            "n_realizations": self.n_realizations,
            "system": self.config,
        })
    }
}

/// One grid point of a sweep, in axis order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub num_aps: usize,
    pub sinr_target_db: f64,
    pub relaxation_factor: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub points: Vec<(SweepPoint, SystemConfig)>,
    pub n_realizations: usize,
}

#[derive(Debug)]
pub struct ParsedConfig {
    pub output_dir: PathBuf,
    pub experiments: Vec<ExperimentSpec>,
    pub sweep: Option<SweepGrid>,
}

fn apply_keys(
    mut b: SystemConfigBuilder,
    sys: &SystemKeys,
    admm: &AdmmKeys,
    seed: u64,
) -> SystemConfigBuilder {
    if let Some(v) = sys.num_aps {
        b = b.num_aps(v);
    }
    if let Some(v) = sys.num_antennas {
        b = b.num_antennas(v);
    }
    if let Some(v) = sys.num_users {
        b = b.num_users(v);
    }
    if let Some(v) = sys.noise_power {
        b = b.noise_power(v);
    }
    if let Some(v) = sys.snr_db {
        b = b.snr_db(v);
    }
    if let Some(v) = sys.sinr_target_db {
        b = b.sinr_target_db(v);
    }
    if let Some(v) = admm.penalty {
        b = b.penalty(v);
    }
    if let Some(v) = admm.relaxation_factor {
        b = b.relaxation_factor(v);
    }
    if let Some(v) = admm.max_iters {
        b = b.max_iters(v);
    }
    if let Some(v) = admm.primal_tol {
        b = b.primal_tol(v);
    }
    if let Some(v) = admm.dual_tol {
        b = b.dual_tol(v);
    }
    if let Some(v) = admm.rel_tol {
        b = b.rel_tol(v);
    }
    b.rng_seed(seed)
}

fn build_config(sys: &SystemKeys, admm: &AdmmKeys, seed: u64) -> Result<SystemConfig> {
    apply_keys(SystemConfig::builder(), sys, admm, seed)
        .build()
        .map_err(CliError::Core)
}

fn valid_scenario_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = fs::read_to_string(path)?;
    let raw: RawConfig = toml::from_str(&text).map_err(|source| CliError::Toml {
        path: path.to_path_buf(),
        source: Box::new(source),
    })?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ParsedConfig> {
    let global_seed = raw.seed.unwrap_or(42);
    let mut names = BTreeSet::new();
    let mut experiments = Vec::with_capacity(raw.experiments.len());
    for exp in &raw.experiments {
        if !valid_scenario_name(&exp.name) {
            return Err(CliError::Config(format!(
                "experiment name {:?} must be non-empty [A-Za-z0-9_-]",
                exp.name
            )));
        }
        if !names.insert(exp.name.clone()) {
            return Err(CliError::Config(format!(
                "duplicate experiment name {:?}",
                exp.name
            )));
        }
        if exp.methods.is_empty() {
            return Err(CliError::Config(format!(
                "experiment {:?} lists no methods",
                exp.name
            )));
        }
        let mut seen = BTreeSet::new();
        for m in &exp.methods {
            if !seen.insert(m.as_str()) {
                return Err(CliError::Config(format!(
                    "experiment {:?} repeats method {:?}",
                    exp.name,
                    m.as_str()
                )));
            }
        }
        let n_realizations = exp.n_realizations.unwrap_or(100);
        if n_realizations == 0 {
            return Err(CliError::Config(format!(
                "experiment {:?}: n_realizations must be >= 1",
                exp.name
            )));
        }
        let sys = raw.system.merged(&exp.system);
        let admm = raw.admm.merged(&exp.admm);
        let seed = exp.seed.unwrap_or(global_seed);
        experiments.push(ExperimentSpec {
            name: exp.name.clone(),
            methods: exp.methods.clone(),
            n_realizations,
            config: build_config(&sys, &admm, seed)?,
        });
    }

    let sweep = match &raw.sweep {
        None => None,
        Some(sw) => {
            let aps = sw.num_aps.clone().unwrap_or_else(|| {
                vec![raw.system.num_aps.unwrap_or(4)]
            });
            let gammas = sw
                .sinr_target_db
                .clone()
                .unwrap_or_else(|| vec![raw.system.sinr_target_db.unwrap_or(15.0)]);
            let cs = sw
                .relaxation_factor
                .clone()
                .unwrap_or_else(|| vec![raw.admm.relaxation_factor.unwrap_or(1.0)]);
            let rhos = sw
                .penalty
                .clone()
                .unwrap_or_else(|| vec![raw.admm.penalty.unwrap_or(10.0)]);
            for (axis, empty) in [
                ("num_aps", aps.is_empty()),
                ("sinr_target_db", gammas.is_empty()),
                ("relaxation_factor", cs.is_empty()),
                ("penalty", rhos.is_empty()),
            ] {
                if empty {
                    return Err(CliError::Config(format!("sweep axis {axis} is empty")));
                }
            }
            let n_realizations = sw.n_realizations.unwrap_or(100);
            if n_realizations == 0 {
                return Err(CliError::Config(
                    "sweep n_realizations must be >= 1".into(),
                ));
            }
            let seed = sw.seed.unwrap_or(global_seed);
            let mut points = Vec::new();
            for &m in &aps {
                for &g in &gammas {
                    for &c in &cs {
                        for &r in &rhos {
                            let sys = raw.system.merged(&SystemKeys {
                                num_aps: Some(m),
                                sinr_target_db: Some(g),
                                ..SystemKeys::default()
                            });
                            let admm = raw.admm.merged(&AdmmKeys {
                                relaxation_factor: Some(c),
                                penalty: Some(r),
                                ..AdmmKeys::default()
                            });
                            let point = SweepPoint {
                                num_aps: m,
                                sinr_target_db: g,
                                relaxation_factor: c,
                                penalty: r,
                            };
                            points.push((point, build_config(&sys, &admm, seed)?));
                        }
                    }
                }
            }
            Some(SweepGrid {
                points,
                n_realizations,
            })
        }
    };

    Ok(ParsedConfig {
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("results")),
        experiments,
        sweep,
    })
}
