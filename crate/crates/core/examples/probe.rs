use cellfree_core::admm;
use cellfree_core::centralized::solve_centralized;
use cellfree_core::metrics::achieved_sinr;
use cellfree_core::model::{generate_channels, linear_to_db, SystemConfig};

fn cfg(m: usize, gamma_db: f64, c: f64, iters: usize) -> SystemConfig {
    SystemConfig::builder()
        .num_aps(m)
        .num_antennas(64)
        .num_users(4)
        .sinr_target_db(gamma_db)
        .relaxation_factor(c)
        .max_iters(iters)
        .build()
        .unwrap()
}

fn main() {
    // Stage A: single-realization trajectory at both targets.
    for gamma in [15.0, 25.0] {
        let c = cfg(2, gamma, 1.0, 30);
        let h = generate_channels(&c, 0);
        let t = std::time::Instant::now();
        let res = admm::run_admm(&h, &c).unwrap();
        let rep = achieved_sinr(&h, &res.precoder, &c);
        println!(
            "gamma {gamma}: iters {} converged {} power {:.3} dB min {:.2} mean {:.2} dB [{:?}]",
            res.iterations_used,
            res.converged,
            linear_to_db(res.total_power),
            rep.min_sinr_db,
            rep.mean_sinr_db,
            t.elapsed()
        );
        for rec in &res.trace {
            let max_pri = rec.primal_residuals.iter().cloned().fold(0.0f64, f64::max);
            let om: f64 = rec.omega.iter().sum::<f64>() / rec.omega.len() as f64;
            let pw: f64 = rec.ap_power.iter().sum();
            println!(
                "  t={:2} omega_bar {:.4} max_pri {:.3e} dual {:.3e} power {:.2}",
                rec.iteration, om, max_pri, rec.dual_residual, pw
            );
        }
    }

    // Stage B/C: mini ensembles, defaults (max_iters 10), c = 1 and calibrated.
    for (gamma, c_cal) in [(15.0, 1.13), (25.0, 1.42)] {
        for c_fac in [1.0, c_cal] {
            let c = cfg(2, gamma, c_fac, 10);
            let mut n_out = 0;
            let mut n_conv = 0;
            let mut iters_sum = 0;
            let mut min_mean = f64::INFINITY;
            let mut worst_min = f64::INFINITY;
            let mut admm_p = Vec::new();
            let mut cent_p = Vec::new();
            let t = std::time::Instant::now();
            for idx in 0..12u64 {
                let h = generate_channels(&c, idx);
                let res = admm::run_admm(&h, &c).unwrap();
                let rep = achieved_sinr(&h, &res.precoder, &c);
                if !rep.all_meet_target() {
                    n_out += 1;
                }
                n_conv += res.converged as usize;
                iters_sum += res.iterations_used;
                min_mean = min_mean.min(rep.mean_sinr_db);
                worst_min = worst_min.min(rep.min_sinr_db);
                admm_p.push(res.total_power);
                cent_p.push(solve_centralized(&h, &c).unwrap().total_power);
            }
            let bad_pairs = admm_p
                .iter()
                .zip(&cent_p)
                .filter(|(a, c)| **c > **a * (1.0 + 1e-4))
                .count();
            println!(
                "gamma {gamma} c {c_fac}: outage {n_out}/12 conv {n_conv}/12 mean_iters {:.1} min_mean {min_mean:.2} worst_min {worst_min:.2} dB cent>admm {bad_pairs} [{:?}]",
                iters_sum as f64 / 12.0,
                t.elapsed()
            );
        }
    }

    // Stage D: residual floor for the small consensus problem.
    let c4 = SystemConfig::builder()
        .num_aps(2)
        .num_antennas(2)
        .num_users(2)
        .sinr_target_db(6.0)
        .max_iters(3000)
        .primal_tol(1e-9)
        .dual_tol(1e-9)
        .rel_tol(1e-9)
        .build()
        .unwrap();
    for idx in 0..3u64 {
        let h = generate_channels(&c4, idx);
        let res = admm::run_admm(&h, &c4).unwrap();
        let last = res.trace.last().unwrap();
        let max_pri = last.primal_residuals.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "floor idx {idx}: iters {} converged {} pri {:.3e} dual {:.3e} power {:.6}",
            res.iterations_used, res.converged, max_pri, last.dual_residual, res.total_power
        );
    }

    // Stage E: M = 1 equivalence gap under the rewrite.
    let c3 = SystemConfig::builder()
        .num_aps(1)
        .num_antennas(16)
        .num_users(4)
        .sinr_target_db(15.0)
        .max_iters(50)
        .build()
        .unwrap();
    let mut max_rel: f64 = 0.0;
    let mut mean_rel = 0.0;
    for idx in 0..20u64 {
        let h = generate_channels(&c3, idx);
        let a = admm::run_admm(&h, &c3).unwrap();
        let c = solve_centralized(&h, &c3).unwrap();
        let rel = (a.total_power - c.total_power).abs() / c.total_power;
        max_rel = max_rel.max(rel);
        mean_rel += rel / 20.0;
    }
    println!("M=1 gap: mean {mean_rel:.4e} max {max_rel:.4e}");
}
