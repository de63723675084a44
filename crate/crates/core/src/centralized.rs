//! Centralized power minimization with full channel knowledge: pick all MK
//! precoding vectors jointly to minimize total transmit power subject to a
//! per-user SINR floor.
//!
//! Each SINR constraint is a second-order cone after fixing the phase of the
//! useful term: with gamma_k the target,
//!
//!   (1/sqrt(gamma_k)) Re(sum_m h_km^T w_km)
//!       >= || ( {sum_m h_km^T w_um}_{u != k}, sigma_k ) ||_2,
//!   Im(sum_m h_km^T w_km) = 0.
//!
//! Fixing the phase is lossless: rotating user k's vectors by a common phase
//! changes no magnitude in the SINR, so some optimal solution always has a
//! real nonnegative useful term.

use serde::Serialize;

use crate::conic::{self, ConicProgram, LinExpr, ProgramBuilder, SolveStatus};
use crate::error::{Error, Result};
use crate::lift;
use crate::metrics;
use crate::model::{ChannelRealization, Precoder, SystemConfig};

#[derive(Debug, Clone, Serialize)]
pub struct CentralizedResult {
    #[serde(skip)]
    pub precoder: Precoder,
    pub total_power: f64,
    pub status: SolveStatus,
    /// Achieved SINR per user (linear), recomputed from the precoder.
    pub per_user_sinr: Vec<f64>,
    /// Interior-point iterations spent.
    pub iterations: usize,
}

/// Index of the real part of antenna `i` of w_km; imaginary parts follow at
/// offset `M*N*K`.
fn re_index(m: usize, num_aps: usize, k: usize, i: usize, n: usize) -> usize {
    (k * num_aps + m) * n + i
}

pub fn build_centralized_program(
    h: &ChannelRealization,
    config: &SystemConfig,
) -> Result<ConicProgram> {
    let (num_aps, n, k_users) = (config.num_aps(), config.num_antennas(), config.num_users());
    check_dims(h, config)?;
    for k in 0..k_users {
        if h.user_channel_is_zero(k) {
            return Err(Error::ZeroChannel { user: k, ap: None });
        }
    }
    let d = num_aps * n * k_users;
    let mut builder = ProgramBuilder::new(2 * d);
    for v in 0..2 * d {
        builder.add_quadratic_diag(v, 2.0);
    }
    for k in 0..k_users {
        // Useful term e_k = sum_m h_km^T w_km.
        let mut re_e = LinExpr::new();
        let mut im_e = LinExpr::new();
        let inv_sqrt_gamma = 1.0 / config.sinr_target(k).sqrt();
        for m in 0..num_aps {
            let base = re_index(m, num_aps, k, 0, n);
            lift::add_re_inner(&mut re_e, inv_sqrt_gamma, h.vector(k, m), base, d + base);
            lift::add_im_inner(&mut im_e, 1.0, h.vector(k, m), base, d + base);
        }
        let mut rows = Vec::with_capacity(2 * (k_users - 1) + 1);
        for u in 0..k_users {
            if u == k {
                continue;
            }
            // Interference from user u's vectors as heard by user k.
            let mut re_f = LinExpr::new();
            let mut im_f = LinExpr::new();
            for m in 0..num_aps {
                let base = re_index(m, num_aps, u, 0, n);
                lift::add_re_inner(&mut re_f, 1.0, h.vector(k, m), base, d + base);
                lift::add_im_inner(&mut im_f, 1.0, h.vector(k, m), base, d + base);
            }
            rows.push(re_f);
            rows.push(im_f);
        }
        rows.push(LinExpr::new().with_constant(config.noise_power(k).sqrt()));
        builder.add_soc(rows, re_e);
        builder.add_eq(im_e);
    }
    builder.build()
}

pub fn solve_centralized(h: &ChannelRealization, config: &SystemConfig) -> Result<CentralizedResult> {
    let program = build_centralized_program(h, config)?;
    let sol = conic::solve(&program, conic::DEFAULT_TOL, conic::DEFAULT_MAX_ITERS);
    let (num_aps, n, k_users) = (config.num_aps(), config.num_antennas(), config.num_users());
    let d = num_aps * n * k_users;
    let precoder = match sol.status {
        SolveStatus::Optimal | SolveStatus::MaxIterations => {
            let mut w = Precoder::zeros(num_aps, n, k_users);
            for k in 0..k_users {
                for m in 0..num_aps {
                    let base = re_index(m, num_aps, k, 0, n);
                    let v = lift::complex_from_split(&sol.x, base, d + base, n);
                    w.set_vector(k, m, &v);
                }
            }
            w
        }
        SolveStatus::Infeasible | SolveStatus::Unbounded => Precoder::zeros(num_aps, n, k_users),
    };
    let per_user_sinr = metrics::achieved_sinr(h, &precoder, config).per_user_sinr;
    Ok(CentralizedResult {
        total_power: precoder.total_power(),
        status: sol.status,
        per_user_sinr,
        iterations: sol.iterations,
        precoder,
    })
}

fn check_dims(h: &ChannelRealization, config: &SystemConfig) -> Result<()> {
    if h.num_aps() != config.num_aps()
        || h.num_antennas() != config.num_antennas()
        || h.num_users() != config.num_users()
    {
        return Err(Error::Config(format!(
            "channel dimensions ({}, {}, {}) do not match config ({}, {}, {})",
            h.num_aps(),
            h.num_antennas(),
            h.num_users(),
            config.num_aps(),
            config.num_antennas(),
            config.num_users()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn config(m: usize, n: usize, k: usize, gamma_db: f64) -> SystemConfig {
        SystemConfig::builder()
            .num_aps(m)
            .num_antennas(n)
            .num_users(k)
            .noise_power(1.0)
            .sinr_target_db(gamma_db)
            .build()
            .unwrap()
    }

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn single_user_single_ap_closed_form() {
        // gamma = 10, sigma^2 = 1, ||h||^2 = 25: optimal power 10/25 = 0.4
        // with w along conj(h).
        let cfg = config(1, 2, 1, 10.0);
        let h = ChannelRealization::from_coefficients(1, 2, 1, vec![re(3.0), re(4.0)]);
        let res = solve_centralized(&h, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.total_power - 0.4).abs() < 1e-6 * 0.4, "{}", res.total_power);
        // Matched-filter direction: w proportional to conj(h) = h here.
        let w = res.precoder.vector(0, 0);
        let cross = w[0] * re(4.0) - w[1] * re(3.0);
        assert!(cross.norm() < 1e-5);
    }

    #[test]
    fn single_user_two_aps_stack_their_channels() {
        // gamma = 4: power = 4 / (1 + 4) = 0.8.
        let cfg = config(2, 1, 1, 10.0 * 4f64.log10());
        let h = ChannelRealization::from_coefficients(2, 1, 1, vec![re(1.0), re(2.0)]);
        let res = solve_centralized(&h, &cfg).unwrap();
        assert!((res.total_power - 0.8).abs() < 1e-6 * 0.8, "{}", res.total_power);
    }

    #[test]
    fn vanishing_target_needs_vanishing_power() {
        let h = ChannelRealization::from_coefficients(1, 2, 1, vec![re(3.0), re(4.0)]);
        let mut last = f64::INFINITY;
        for gamma_db in [-20.0, -40.0, -60.0] {
            let cfg = config(1, 2, 1, gamma_db);
            let res = solve_centralized(&h, &cfg).unwrap();
            assert!(res.total_power < last);
            last = res.total_power;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn orthogonal_users_decouple() {
        // h_1 = (1, 0), h_2 = (0, 2) on one 2-antenna AP: no cross
        // interference at the optimum, so power = sum_k gamma sigma^2/||h_k||^2.
        let gamma_db = 6.0;
        let cfg = config(1, 2, 2, gamma_db);
        let h = ChannelRealization::from_coefficients(
            1,
            2,
            2,
            vec![re(1.0), re(0.0), re(0.0), re(2.0)],
        );
        let res = solve_centralized(&h, &cfg).unwrap();
        let gamma = crate::model::db_to_linear(gamma_db);
        let expect = gamma / 1.0 + gamma / 4.0;
        assert!(
            (res.total_power - expect).abs() < 1e-6 * expect,
            "{} vs {}",
            res.total_power,
            expect
        );
    }

    #[test]
    fn channel_scaling_rescales_power() {
        let cfg = config(2, 2, 2, 8.0);
        let h = crate::model::generate_channels(&cfg, 3);
        let base = solve_centralized(&h, &cfg).unwrap();
        let alpha = 2.5;
        let scaled_coeffs: Vec<Complex64> = (0..2 * 2 * 2)
            .map(|idx| {
                let (k, m, i) = (idx / 4, (idx / 2) % 2, idx % 2);
                h.vector(k, m)[i] * alpha
            })
            .collect();
        let hs = ChannelRealization::from_coefficients(2, 2, 2, scaled_coeffs);
        let scaled = solve_centralized(&hs, &cfg).unwrap();
        let expect = base.total_power / (alpha * alpha);
        assert!(
            (scaled.total_power - expect).abs() < 1e-5 * expect,
            "{} vs {}",
            scaled.total_power,
            expect
        );
    }

    #[test]
    fn zero_channel_is_rejected_up_front() {
        let cfg = config(2, 1, 2, 10.0);
        let h = ChannelRealization::from_coefficients(
            2,
            1,
            2,
            vec![re(1.0), re(1.0), re(0.0), re(0.0)],
        );
        match build_centralized_program(&h, &cfg) {
            Err(Error::ZeroChannel { user: 1, ap: None }) => {}
            other => panic!("expected ZeroChannel for user 1, got {other:?}"),
        }
    }

    #[test]
    fn constraints_are_active_at_the_optimum() {
        let cfg = config(2, 4, 3, 12.0);
        let h = crate::model::generate_channels(&cfg, 11);
        let res = solve_centralized(&h, &cfg).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        for k in 0..3 {
            let ratio = res.per_user_sinr[k] / cfg.sinr_target(k);
            assert!(
                (ratio - 1.0).abs() <= 1e-3,
                "user {k} SINR/target = {ratio}"
            );
        }
        let recomputed = res.precoder.total_power();
        assert!((res.total_power - recomputed).abs() <= 1e-9 * recomputed.max(1.0));
    }
}
