//! Conjugate (matched-filter) beamforming: each AP points each user's vector
//! along its own conjugated channel, with no information exchange at all.
//! Interference grows with transmit power just like the useful term, so the
//! achievable SINR saturates; the sweep below estimates that ceiling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{ChannelRealization, Precoder, SystemConfig};

/// Transmit power assigned to each (user, AP) pair, row-major `k * M + m`.
#[derive(Debug, Clone, Serialize)]
pub struct PowerAllocation {
    p: Vec<f64>,
    num_aps: usize,
    num_users: usize,
}

impl PowerAllocation {
    pub fn new(num_aps: usize, num_users: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != num_aps * num_users {
            return Err(Error::Config(format!(
                "allocation wants {} entries, got {}",
                num_aps * num_users,
                p.len()
            )));
        }
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::Config(
                "allocation entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            p,
            num_aps,
            num_users,
        })
    }

    /// Splits a total budget evenly over all MK pairs.
    pub fn equal_split(total: f64, num_aps: usize, num_users: usize) -> Result<Self> {
        if !(total.is_finite() && total >= 0.0) {
            return Err(Error::Config("total power must be finite and >= 0".into()));
        }
        let share = total / (num_aps * num_users) as f64;
        Self::new(num_aps, num_users, vec![share; num_aps * num_users])
    }

    pub fn power(&self, user: usize, ap: usize) -> f64 {
        self.p[user * self.num_aps + ap]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// `w_km = sqrt(p_km) conj(h_km)/||h_km||`, so the pair transmits exactly
/// p_km and `h_km^T w_km = sqrt(p_km) ||h_km||` is real nonnegative.
pub fn conjugate_precoder(h: &ChannelRealization, alloc: &PowerAllocation) -> Result<Precoder> {
    let (num_aps, n, k_users) = (h.num_aps(), h.num_antennas(), h.num_users());
    if alloc.num_aps != num_aps || alloc.num_users != k_users {
        return Err(Error::Config(format!(
            "allocation shaped ({}, {}) does not match channel ({}, {})",
            alloc.num_users, alloc.num_aps, k_users, num_aps
        )));
    }
    let mut w = Precoder::zeros(num_aps, n, k_users);
    for k in 0..k_users {
        for m in 0..num_aps {
            let p = alloc.power(k, m);
            if p == 0.0 {
                continue;
            }
            let norm = h.norm_sq(k, m).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroChannel {
                    user: k,
                    ap: Some(m),
                });
            }
            let scale = p.sqrt() / norm;
            let v: Vec<_> = h.vector(k, m).iter().map(|c| c.conj() * scale).collect();
            w.set_vector(k, m, &v);
        }
    }
    Ok(w)
}

/// Min-over-users SINR of equal-split conjugate beamforming at one total
/// power along a sweep, plus the best point.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugateSweep {
    /// `(total_power, min-user SINR in dB)` per grid point, grid order.
    pub grid: Vec<(f64, f64)>,
    /// Largest min-user SINR over the grid, in dB.
    pub saturation_sinr_db: f64,
    /// Total power attaining it; ties go to the smallest power.
    pub best_total_power: f64,
}

/// Sweeps an ascending positive grid of total powers with the equal split
/// and reports the min-user SINR curve. The curve flattens once
/// interference dominates noise, which is what bounds this baseline.
pub fn max_sinr_under_conjugate(
    h: &ChannelRealization,
    config: &SystemConfig,
    power_grid: &[f64],
) -> Result<ConjugateSweep> {
    if power_grid.is_empty() {
        return Err(Error::Config("power grid must be non-empty".into()));
    }
    if power_grid.iter().any(|&p| !(p.is_finite() && p > 0.0))
        || power_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::Config(
            "power grid must be ascending positive reals".into(),
        ));
    }
    let grid: Vec<(f64, f64)> = power_grid
        .par_iter()
        .map(|&total| {
            let alloc = PowerAllocation::equal_split(total, h.num_aps(), h.num_users())?;
            let w = conjugate_precoder(h, &alloc)?;
            let report = metrics::achieved_sinr(h, &w, config);
            Ok((total, report.min_sinr_db))
        })
        .collect::<Result<_>>()?;
    let (best_total_power, saturation_sinr_db) = grid
        .iter()
        .copied()
        .fold((grid[0].0, f64::NEG_INFINITY), |(bp, bs), (p, s)| {
            if s > bs {
                (p, s)
            } else {
                (bp, bs)
            }
        });
    Ok(ConjugateSweep {
        grid,
        saturation_sinr_db,
        best_total_power,
    })
}

/// The default grid used by the CLI: total transmit SNR from -10 dB to
/// 50 dB in 2 dB steps, scaled by a reference noise power.
pub fn default_power_grid(noise_power_ref: f64) -> Vec<f64> {
    (-5..=25)
        .map(|s| noise_power_ref * crate::model::db_to_linear((2 * s) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::linear_to_db;
    use num_complex::Complex64;

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn unit_channel_scales_by_sqrt_power() {
        let h = ChannelRealization::from_coefficients(1, 2, 1, vec![re(1.0), re(0.0)]);
        let alloc = PowerAllocation::new(1, 1, vec![4.0]).unwrap();
        let w = conjugate_precoder(&h, &alloc).unwrap();
        assert_eq!(w.vector(0, 0), &[re(2.0), re(0.0)]);
        assert!((w.total_power() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_power_gives_zero_vector_even_on_zero_channel() {
        let h = ChannelRealization::from_coefficients(1, 1, 2, vec![re(1.0), re(0.0)]);
        let alloc = PowerAllocation::new(1, 2, vec![1.0, 0.0]).unwrap();
        let w = conjugate_precoder(&h, &alloc).unwrap();
        assert_eq!(w.vector(1, 0), &[re(0.0)]);

        let bad = PowerAllocation::new(1, 2, vec![1.0, 0.5]).unwrap();
        match conjugate_precoder(&h, &bad) {
            Err(Error::ZeroChannel { user: 1, ap: Some(0) }) => {}
            other => panic!("expected ZeroChannel, got {other:?}"),
        }
    }

    #[test]
    fn allocation_reproduces_total_power() {
        let cfg = SystemConfig::builder()
            .num_aps(2)
            .num_antennas(3)
            .num_users(2)
            .build()
            .unwrap();
        let h = crate::model::generate_channels(&cfg, 5);
        let alloc = PowerAllocation::new(2, 2, vec![0.5, 1.5, 2.0, 0.25]).unwrap();
        let w = conjugate_precoder(&h, &alloc).unwrap();
        assert!((w.total_power() - alloc.total()).abs() < 1e-12 * alloc.total());
        for k in 0..2 {
            for m in 0..2 {
                // Useful term per pair is real nonnegative by construction.
                let g: Complex64 = h
                    .vector(k, m)
                    .iter()
                    .zip(w.vector(k, m))
                    .map(|(a, b)| a * b)
                    .sum();
                assert!(g.im.abs() <= 1e-12);
                assert!(g.re >= 0.0);
            }
        }
    }

    #[test]
    fn sweep_saturates_in_the_interference_limit() {
        // beta/sigma^2 at 0 dB so the low end of the grid is noise limited.
        let cfg = SystemConfig::builder()
            .num_aps(2)
            .num_antennas(8)
            .num_users(4)
            .noise_power(1.0)
            .snr_db(0.0)
            .build()
            .unwrap();
        let h = crate::model::generate_channels(&cfg, 1);
        let grid = default_power_grid(1.0);
        let sweep = max_sinr_under_conjugate(&h, &cfg, &grid).unwrap();
        assert_eq!(sweep.grid.len(), grid.len());
        // Low-power end is noise limited: tiny SINR.
        assert!(sweep.grid[0].1 < sweep.saturation_sinr_db - 3.0);
        // Top of the grid is interference limited: doubling power moves the
        // min-user SINR by under 0.1 dB.
        let last = sweep.grid[sweep.grid.len() - 1].1;
        let prev = sweep.grid[sweep.grid.len() - 2].1;
        assert!((last - prev).abs() < 0.1, "{prev} -> {last}");
        assert!(sweep.saturation_sinr_db >= last - 1e-12);
        assert!(sweep.best_total_power > 0.0);
    }

    #[test]
    fn single_user_sweep_has_no_ceiling() {
        // K = 1 has no interference; min-user SINR grows ~1 dB per dB.
        let cfg = SystemConfig::builder()
            .num_aps(1)
            .num_antennas(4)
            .num_users(1)
            .noise_power(1.0)
            .build()
            .unwrap();
        let h = crate::model::generate_channels(&cfg, 2);
        let sweep = max_sinr_under_conjugate(&h, &cfg, &[1.0, 10.0, 100.0]).unwrap();
        let s: Vec<f64> = sweep.grid.iter().map(|&(_, s)| s).collect();
        assert!((s[1] - s[0] - 10.0).abs() < 1e-9);
        assert!((s[2] - s[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn grid_validation() {
        let cfg = SystemConfig::builder()
            .num_aps(1)
            .num_antennas(1)
            .num_users(1)
            .build()
            .unwrap();
        let h = crate::model::generate_channels(&cfg, 0);
        assert!(max_sinr_under_conjugate(&h, &cfg, &[]).is_err());
        assert!(max_sinr_under_conjugate(&h, &cfg, &[1.0, 1.0]).is_err());
        assert!(max_sinr_under_conjugate(&h, &cfg, &[2.0, 1.0]).is_err());
        assert!(max_sinr_under_conjugate(&h, &cfg, &[0.0, 1.0]).is_err());
        assert!(max_sinr_under_conjugate(&h, &cfg, &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn equal_split_shares_evenly() {
        let a = PowerAllocation::equal_split(12.0, 3, 2).unwrap();
        for k in 0..2 {
            for m in 0..3 {
                assert_eq!(a.power(k, m), 2.0);
            }
        }
        assert!((a.total() - 12.0).abs() < 1e-12);
        assert!(PowerAllocation::equal_split(-1.0, 1, 1).is_err());
        assert!(PowerAllocation::new(1, 1, vec![f64::NAN]).is_err());
        assert!(PowerAllocation::new(2, 1, vec![1.0]).is_err());
    }

    #[test]
    fn linear_to_db_consistency_on_sweep_values() {
        // Spot check: SINR reported in dB matches a direct evaluation.
        let cfg = SystemConfig::builder()
            .num_aps(2)
            .num_antennas(2)
            .num_users(2)
            .build()
            .unwrap();
        let h = crate::model::generate_channels(&cfg, 9);
        let alloc = PowerAllocation::equal_split(4.0, 2, 2).unwrap();
        let w = conjugate_precoder(&h, &alloc).unwrap();
        let report = metrics::achieved_sinr(&h, &w, &cfg);
        let sweep = max_sinr_under_conjugate(&h, &cfg, &[4.0]).unwrap();
        assert!((sweep.grid[0].1 - report.min_sinr_db).abs() < 1e-12);
        let min_lin = report
            .per_user_sinr
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        assert!((report.min_sinr_db - linear_to_db(min_lin)).abs() < 1e-12);
    }
}
