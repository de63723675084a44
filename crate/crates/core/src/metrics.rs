//! Ground-truth evaluation: achieved SINR for a (channel, precoder) pair,
//! transmit power, empirical CDFs, and outage statistics over seeded
//! ensembles.
//!
//! The SINR of user k is
//! `|sum_m h_km' w_km|^2 / (sum_{u != k} |sum_m h_km' w_um|^2 + sigma_k^2)`
//! with `'` the plain transpose (no conjugation): the channel acts on the
//! transmitted signal, it is not a receive filter. Every optimization route
//! in this crate is judged against this one function.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{linear_to_db, ChannelRealization, Precoder, SystemConfig};

/// `sum_m h_km^T w_um`: the complex amplitude user `k` receives from the
/// precoding vectors intended for user `u`.
pub fn received_amplitude(
    h: &ChannelRealization,
    w: &Precoder,
    user_k: usize,
    user_u: usize,
) -> Complex64 {
    let mut g = Complex64::new(0.0, 0.0);
    for m in 0..h.num_aps() {
        let hv = h.vector(user_k, m);
        let wv = w.vector(user_u, m);
        for (hi, wi) in hv.iter().zip(wv) {
            g += hi * wi;
        }
    }
    g
}

/// Per-user achieved SINR of one precoder on one channel draw.
#[derive(Debug, Clone, Serialize)]
pub struct SinrReport {
    /// Linear SINR per user.
    pub per_user_sinr: Vec<f64>,
    pub per_user_sinr_db: Vec<f64>,
    pub min_sinr_db: f64,
    /// dB of the arithmetic mean of the linear per-user SINRs.
    pub mean_sinr_db: f64,
    /// `per_user_sinr[k] >= sinr_target(k)`, exact comparison.
    pub meets_target: Vec<bool>,
}

impl SinrReport {
    /// True when every user reaches its target; a realization counts as an
    /// outage when this is false.
    pub fn all_meet_target(&self) -> bool {
        self.meets_target.iter().all(|&b| b)
    }
}

pub fn achieved_sinr(h: &ChannelRealization, w: &Precoder, config: &SystemConfig) -> SinrReport {
    let k_users = config.num_users();
    let mut per_user_sinr = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let signal = received_amplitude(h, w, k, k).norm_sqr();
        let mut denom = config.noise_power(k);
        for u in 0..k_users {
            if u != k {
                denom += received_amplitude(h, w, k, u).norm_sqr();
            }
        }
        per_user_sinr.push(signal / denom);
    }
    let per_user_sinr_db: Vec<f64> = per_user_sinr.iter().map(|&s| linear_to_db(s)).collect();
    let min_sinr_db = per_user_sinr_db
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mean_linear = per_user_sinr.iter().sum::<f64>() / k_users as f64;
    let meets_target = per_user_sinr
        .iter()
        .enumerate()
        .map(|(k, &s)| s >= config.sinr_target(k))
        .collect();
    SinrReport {
        per_user_sinr,
        per_user_sinr_db,
        min_sinr_db,
        mean_sinr_db: linear_to_db(mean_linear),
        meets_target,
    }
}

/// `sum_{k,m} ||w_km||^2`.
pub fn total_power(w: &Precoder) -> f64 {
    w.total_power()
}

/// Total transmit power over a reference noise floor, in dB.
pub fn transmit_snr_db(w: &Precoder, noise_power_ref: f64) -> f64 {
    linear_to_db(w.total_power() / noise_power_ref)
}

/// Empirical distribution of a scalar sample set. Steps at each distinct
/// sorted value; the last point has cumulative fraction exactly 1.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalCdf {
    #[serde(skip)]
    sorted: Vec<f64>,
    points: Vec<(f64, f64)>,
}

impl EmpiricalCdf {
    /// None for an empty sample set.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match points.last_mut() {
                Some(last) if last.0 == v => last.1 = frac,
                _ => points.push((v, frac)),
            }
        }
        Some(Self { sorted, points })
    }

    /// Sorted `(value, fraction of samples <= value)` pairs, one per distinct
    /// value.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn num_samples(&self) -> usize {
        self.sorted.len()
    }

    /// Fraction of samples strictly below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v < threshold);
        count as f64 / self.sorted.len() as f64
    }

    /// Smallest sample value with cumulative fraction >= `q`, for q in (0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        assert!(q > 0.0 && q <= 1.0, "quantile wants q in (0, 1], got {q}");
        let n = self.sorted.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[rank - 1]
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }
}

/// What a precoder-design method returns for one channel realization.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub precoder: Precoder,
    /// Solver or consensus iterations actually used.
    pub iterations: usize,
    pub converged: bool,
}

/// One evaluated realization inside an ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSample {
    pub realization_index: u64,
    pub report: SinrReport,
    pub total_power: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Aggregate of a method over seeded channel realizations. A realization is
/// in outage when any user misses its SINR target.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    /// Successful realizations, ascending by realization index.
    pub samples: Vec<EnsembleSample>,
    /// `(realization_index, error text)` for realizations whose method call
    /// failed; excluded from the statistics below.
    pub failures: Vec<(u64, String)>,
    /// Distribution of the per-realization minimum per-user SINR (dB).
    pub min_user_cdf: EmpiricalCdf,
    /// Distribution of the per-realization mean per-user SINR (dB).
    pub mean_user_cdf: EmpiricalCdf,
    pub outage_fraction: f64,
}

/// Runs `method` on `n_realizations` seeded channel draws and aggregates the
/// achieved-SINR statistics. Realizations are generated from
/// `(config.rng_seed(), index)` so the set of draws is independent of
/// evaluation order; results are always aggregated in ascending index order.
///
/// Individual failures are recorded and excluded; the whole ensemble aborts
/// only when more than 10% of realizations fail.
pub fn ensemble<F>(config: &SystemConfig, n_realizations: usize, method: F) -> Result<EnsembleStats>
where
    F: Fn(&ChannelRealization, &SystemConfig) -> Result<MethodOutcome> + Sync,
{
    if n_realizations == 0 {
        return Err(Error::Config("ensemble wants n_realizations >= 1".into()));
    }
    let mut evaluated: Vec<(u64, Result<EnsembleSample>)> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|idx| {
            let h = crate::model::generate_channels(config, idx);
            let outcome = method(&h, config).map(|out| {
                let report = achieved_sinr(&h, &out.precoder, config);
                EnsembleSample {
                    realization_index: idx,
                    total_power: out.precoder.total_power(),
                    iterations: out.iterations,
                    converged: out.converged,
                    report,
                }
            });
            (idx, outcome)
        })
        .collect();
    evaluated.sort_by_key(|&(idx, _)| idx);

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (idx, outcome) in evaluated {
        match outcome {
            Ok(sample) => samples.push(sample),
            Err(e) => failures.push((idx, e.to_string())),
        }
    }
    if failures.len() * 10 > n_realizations {
        return Err(Error::EnsembleAborted {
            failures: failures.len(),
            total: n_realizations,
        });
    }
    let min_db: Vec<f64> = samples.iter().map(|s| s.report.min_sinr_db).collect();
    let mean_db: Vec<f64> = samples.iter().map(|s| s.report.mean_sinr_db).collect();
    let outages = samples
        .iter()
        .filter(|s| !s.report.all_meet_target())
        .count();
    Ok(EnsembleStats {
        outage_fraction: outages as f64 / samples.len() as f64,
        min_user_cdf: EmpiricalCdf::from_samples(&min_db).expect("non-empty by the abort rule"),
        mean_user_cdf: EmpiricalCdf::from_samples(&mean_db).expect("non-empty by the abort rule"),
        samples,
        failures,
    })
}
