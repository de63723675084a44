//! Consensus ADMM over access points. Each AP designs its own precoder
//! block against a relaxed per-AP share of every user's SINR target,
//! declares the total interference it believes each user suffers, and the
//! central node averages those declarations; dual ascent drives the APs to
//! agree.
//!
//! Per iteration, AP m solves
//!
//!   minimize  tr(W_m^H W_m) + V_m^T (z_m - Omega) + (rho/2) ||z_m - Omega||^2
//!   subject to, per user k:
//!     Re(h_km^T w_km) >= (gh_k/M) (z_k + sigma_k),
//!     Im(h_km^T w_km) = 0,
//!     i_k >= ||(h_km^T w_um)_{u != k}||_2,
//!     z_k - i_k >= 0,
//!
//! with gh_k the calibrated square-root SINR target. `i_k` is the
//! interference this AP causes user k; `z_k` declares the user's total, so
//! it can never fall below this AP's own contribution. The central node
//! then sets Omega = (1/M) sum_m z_m and each AP updates
//! V_m += rho (z_m - Omega).

use serde::Serialize;

use crate::conic::{self, ConicProgram, LinExpr, ProgramBuilder, SolveStatus};
use crate::error::{Error, Result};
use crate::lift;
use crate::model::{ChannelRealization, Precoder, SystemConfig};
use num_complex::Complex64;

/// Everything AP `m` owns: its precoder block, declared interference, and
/// dual variables. Nothing here crosses the fronthaul except `z` (outbound)
/// and Omega (inbound).
#[derive(Debug, Clone)]
pub struct ApLocalState {
    pub ap_index: usize,
    /// Precoder block, user-major: antenna i of user k at `k * N + i`.
    pub w: Vec<Complex64>,
    /// Own declared interference per user, `I_km`.
    pub i_own: Vec<f64>,
    /// Declared total interference per user, `z_km >= I_km >= 0`.
    pub z: Vec<f64>,
    /// Dual variables, one per user.
    pub v: Vec<f64>,
    /// Augmented-Lagrangian value of the last local solve.
    pub last_local_objective: f64,
}

impl ApLocalState {
    pub fn precoding_vector(&self, user: usize, num_antennas: usize) -> &[Complex64] {
        &self.w[user * num_antennas..(user + 1) * num_antennas]
    }

    pub fn block_power(&self) -> f64 {
        self.w.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub omega: Vec<f64>,
    /// `||z_m - Omega||_2` per AP.
    pub primal_residuals: Vec<f64>,
    /// `rho * ||Omega_t - Omega_{t-1}||_2`.
    pub dual_residual: f64,
    /// Transmit power of each AP's block.
    pub ap_power: Vec<f64>,
}

/// Central-node view of the consensus: the averaged interference and the
/// residuals that drive the stopping rule.
#[derive(Debug, Clone)]
pub struct ConsensusState {
    pub omega: Vec<f64>,
    prev_omega: Vec<f64>,
    pub iteration: usize,
    pub primal_residuals: Vec<f64>,
    pub dual_residual: f64,
    pub trace: Vec<IterationRecord>,
}

impl ConsensusState {
    /// Folds the iteration-t average and the per-AP states into residuals
    /// and a trace row. Called once per iteration after the broadcast.
    fn advance(&mut self, iteration: usize, omega: Vec<f64>, aps: &[ApLocalState], rho: f64) {
        self.prev_omega = std::mem::replace(&mut self.omega, omega);
        self.iteration = iteration;
        self.primal_residuals = aps
            .iter()
            .map(|ap| l2_diff(&ap.z, &self.omega))
            .collect();
        self.dual_residual = rho * l2_diff(&self.omega, &self.prev_omega);
        self.trace.push(IterationRecord {
            iteration,
            omega: self.omega.clone(),
            primal_residuals: self.primal_residuals.clone(),
            dual_residual: self.dual_residual,
            ap_power: aps.iter().map(ApLocalState::block_power).collect(),
        });
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmmResult {
    #[serde(skip)]
    pub precoder: Precoder,
    pub iterations_used: usize,
    /// True when the residual rule, not the iteration cap, ended the run.
    pub converged: bool,
    pub total_power: f64,
    pub trace: Vec<IterationRecord>,
}

/// What one AP sends uplink each iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceReport {
    pub ap_index: usize,
    pub z: Vec<f64>,
}

/// Transport between the APs and the central node. The identity transport
/// below runs the algorithm in-process; the network simulator wraps the
/// same calls with byte accounting.
pub trait Fronthaul {
    /// Carries each AP's interference report to the central node.
    fn uplink(
        &mut self,
        iteration: usize,
        reports: Vec<InterferenceReport>,
    ) -> Result<Vec<InterferenceReport>>;
    /// Carries the averaged interference back to every AP.
    fn downlink(&mut self, iteration: usize, omega: Vec<f64>) -> Result<Vec<f64>>;
}

/// Lossless in-process transport.
#[derive(Debug, Default)]
pub struct DirectLink;

impl Fronthaul for DirectLink {
    fn uplink(
        &mut self,
        _iteration: usize,
        reports: Vec<InterferenceReport>,
    ) -> Result<Vec<InterferenceReport>> {
        Ok(reports)
    }

    fn downlink(&mut self, _iteration: usize, omega: Vec<f64>) -> Result<Vec<f64>> {
        Ok(omega)
    }
}

/// Matched-filter bootstrap. Each AP starts from conjugate precoders at the
/// zero-interference amplitude (gh_k/M) sigma_k, measures the interference
/// those cause, and seeds its declaration with its network-wide estimate,
/// M times its own share. The seeded consensus average is then exactly the
/// total interference the bootstrap precoders cause, so the first local
/// solves negotiate down from a physically measured level instead of the
/// infeasible-to-interpret zero. Duals start at zero.
pub fn init_state(
    h: &ChannelRealization,
    config: &SystemConfig,
) -> (Vec<ApLocalState>, ConsensusState) {
    let (num_aps, n, k_users) = (config.num_aps(), config.num_antennas(), config.num_users());
    let mut aps: Vec<ApLocalState> = (0..num_aps)
        .map(|m| {
            let mut w = vec![Complex64::new(0.0, 0.0); n * k_users];
            for k in 0..k_users {
                let norm_sq = h.norm_sq(k, m);
                if norm_sq == 0.0 {
                    continue;
                }
                let amp = config.gamma_hat(k) * config.noise_power(k).sqrt()
                    / (num_aps as f64 * norm_sq);
                for (wi, hi) in w[k * n..(k + 1) * n].iter_mut().zip(h.vector(k, m)) {
                    *wi = hi.conj() * amp;
                }
            }
            ApLocalState {
                ap_index: m,
                w,
                i_own: vec![0.0; k_users],
                z: vec![0.0; k_users],
                v: vec![0.0; k_users],
                last_local_objective: 0.0,
            }
        })
        .collect();
    for m in 0..num_aps {
        for k in 0..k_users {
            let own = (0..k_users)
                .filter(|&u| u != k)
                .map(|u| {
                    let e: Complex64 = h
                        .vector(k, m)
                        .iter()
                        .zip(aps[m].precoding_vector(u, n))
                        .map(|(a, b)| a * b)
                        .sum();
                    e.norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            aps[m].i_own[k] = own;
            aps[m].z[k] = num_aps as f64 * own;
        }
    }
    let mut omega = vec![0.0; k_users];
    for ap in &aps {
        for (acc, &zk) in omega.iter_mut().zip(&ap.z) {
            *acc += zk / num_aps as f64;
        }
    }
    let consensus = ConsensusState {
        prev_omega: omega.clone(),
        omega,
        iteration: 0,
        primal_residuals: vec![0.0; num_aps],
        dual_residual: 0.0,
        trace: Vec::new(),
    };
    (aps, consensus)
}

/// Variable layout of the local program: split precoder block first, then
/// per-user auxiliaries.
struct LocalLayout {
    n: usize,
    k_users: usize,
}

impl LocalLayout {
    fn re_w(&self, k: usize, i: usize) -> usize {
        k * self.n + i
    }
    fn im_w(&self, k: usize, i: usize) -> usize {
        self.n * self.k_users + k * self.n + i
    }
    /// Declared own interference `I_km`.
    fn i_own(&self, k: usize) -> usize {
        2 * self.n * self.k_users + k
    }
    /// Declared total interference `z_km`.
    fn z(&self, k: usize) -> usize {
        2 * self.n * self.k_users + self.k_users + k
    }
    fn num_vars(&self) -> usize {
        2 * self.n * self.k_users + 2 * self.k_users
    }
}

pub fn build_local_program(
    h: &ChannelRealization,
    ap: usize,
    omega: &[f64],
    v: &[f64],
    config: &SystemConfig,
) -> Result<ConicProgram> {
    let (n, k_users) = (config.num_antennas(), config.num_users());
    let num_aps = config.num_aps();
    for k in 0..k_users {
        if h.norm_sq(k, ap) == 0.0 {
            return Err(Error::ZeroChannel {
                user: k,
                ap: Some(ap),
            });
        }
    }
    let layout = LocalLayout { n, k_users };
    let rho = config.penalty();
    let sqrt_rho = rho.sqrt();
    let mut builder = ProgramBuilder::new(layout.num_vars());
    for k in 0..k_users {
        for i in 0..n {
            builder.add_quadratic_diag(layout.re_w(k, i), 2.0);
            builder.add_quadratic_diag(layout.im_w(k, i), 2.0);
        }
        // V_k (z_k - Omega_k) + (rho/2)(z_k - Omega_k)^2.
        builder.add_linear(layout.z(k), v[k]);
        builder.add_constant(-v[k] * omega[k]);
        builder.add_gram_row(
            LinExpr::new()
                .with_term(layout.z(k), sqrt_rho)
                .with_constant(-sqrt_rho * omega[k]),
        );
    }
    let share = 1.0 / num_aps as f64;
    for k in 0..k_users {
        let hv = h.vector(k, ap);
        let gh = config.gamma_hat(k) * share;
        let sigma = config.noise_power(k).sqrt();
        // Interference this AP causes user k through the other users'
        // vectors.
        let mut int_rows = Vec::with_capacity(2 * (k_users - 1));
        for u in 0..k_users {
            if u == k {
                continue;
            }
            let mut re_f = LinExpr::new();
            let mut im_f = LinExpr::new();
            lift::add_re_inner(&mut re_f, 1.0, hv, layout.re_w(u, 0), layout.im_w(u, 0));
            lift::add_im_inner(&mut im_f, 1.0, hv, layout.re_w(u, 0), layout.im_w(u, 0));
            int_rows.push(re_f);
            int_rows.push(im_f);
        }
        builder.add_soc(int_rows, LinExpr::new().with_term(layout.i_own(k), 1.0));
        // Relaxed SINR share: the useful term must cover the declared total
        // interference and the noise.
        let mut sinr_row = LinExpr::new()
            .with_term(layout.z(k), -gh)
            .with_constant(-gh * sigma);
        lift::add_re_inner(&mut sinr_row, 1.0, hv, layout.re_w(k, 0), layout.im_w(k, 0));
        builder.add_nonneg(sinr_row);
        let mut im_e = LinExpr::new();
        lift::add_im_inner(&mut im_e, 1.0, hv, layout.re_w(k, 0), layout.im_w(k, 0));
        builder.add_eq(im_e);
        builder.add_nonneg(
            LinExpr::new()
                .with_term(layout.z(k), 1.0)
                .with_term(layout.i_own(k), -1.0),
        );
    }
    builder.build()
}

/// Solves AP `state.ap_index`'s subproblem against the current consensus
/// and replaces its primal variables; duals are untouched.
pub fn local_step(
    state: &mut ApLocalState,
    h: &ChannelRealization,
    omega: &[f64],
    config: &SystemConfig,
) -> Result<()> {
    let program = build_local_program(h, state.ap_index, omega, &state.v, config)?;
    let sol = conic::solve(&program, conic::DEFAULT_TOL, conic::DEFAULT_MAX_ITERS);
    if sol.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure {
            status: sol.status,
            ap: Some(state.ap_index),
            iteration: None,
        });
    }
    let (n, k_users) = (config.num_antennas(), config.num_users());
    let layout = LocalLayout { n, k_users };
    state.w = lift::complex_from_split(&sol.x, 0, n * k_users, n * k_users);
    for k in 0..k_users {
        state.i_own[k] = sol.x[layout.i_own(k)];
        state.z[k] = sol.x[layout.z(k)];
    }
    state.last_local_objective = sol.objective_value;
    Ok(())
}

/// `Omega_k = (1/M) sum_m z_km`, summed in ascending AP order so the result
/// does not depend on arrival order.
pub fn consensus_update(
    num_aps: usize,
    iteration: usize,
    reports: &[InterferenceReport],
) -> Result<Vec<f64>> {
    let mut by_ap: Vec<Option<&InterferenceReport>> = vec![None; num_aps];
    for r in reports {
        if r.ap_index < num_aps {
            by_ap[r.ap_index] = Some(r);
        }
    }
    let k_users = match by_ap.iter().flatten().next() {
        Some(r) => r.z.len(),
        None => return Err(Error::MissingReport { ap: 0, iteration }),
    };
    let mut omega = vec![0.0; k_users];
    for (m, slot) in by_ap.iter().enumerate() {
        let r = slot.ok_or(Error::MissingReport { ap: m, iteration })?;
        for (acc, &zk) in omega.iter_mut().zip(&r.z) {
            *acc += zk;
        }
    }
    let inv_m = 1.0 / num_aps as f64;
    for w in &mut omega {
        *w *= inv_m;
    }
    Ok(omega)
}

/// `V += rho (z - Omega)`.
pub fn dual_update(v: &mut [f64], z: &[f64], omega: &[f64], rho: f64) {
    for ((vk, &zk), &ok) in v.iter_mut().zip(z).zip(omega) {
        *vk += rho * (zk - ok);
    }
}

/// Residual stopping rule: primal and dual residuals under their scaled
/// tolerances, or the iteration cap.
pub fn check_stop(
    consensus: &ConsensusState,
    aps: &[ApLocalState],
    config: &SystemConfig,
) -> bool {
    consensus.iteration >= config.max_iters() || residuals_met(consensus, aps, config)
}

fn residuals_met(consensus: &ConsensusState, aps: &[ApLocalState], config: &SystemConfig) -> bool {
    if consensus.iteration == 0 {
        return false;
    }
    let sqrt_k = (config.num_users() as f64).sqrt();
    let max_z = aps.iter().map(|ap| l2(&ap.z)).fold(0.0f64, f64::max);
    let eps_pri =
        sqrt_k * config.primal_tol() + config.rel_tol() * max_z.max(l2(&consensus.omega));
    let max_v = aps.iter().map(|ap| l2(&ap.v)).fold(0.0f64, f64::max);
    let eps_dual = sqrt_k * config.dual_tol() + config.rel_tol() * max_v;
    let max_pri = consensus
        .primal_residuals
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    max_pri <= eps_pri && consensus.dual_residual <= eps_dual
}

pub fn run_admm(h: &ChannelRealization, config: &SystemConfig) -> Result<AdmmResult> {
    run_admm_with(h, config, &mut DirectLink)
}

/// The full loop against an arbitrary transport: local solves, uplink of
/// interference declarations, central averaging, broadcast, dual ascent.
pub fn run_admm_with(
    h: &ChannelRealization,
    config: &SystemConfig,
    link: &mut dyn Fronthaul,
) -> Result<AdmmResult> {
    check_dims(h, config)?;
    let (num_aps, n, k_users) = (config.num_aps(), config.num_antennas(), config.num_users());
    let (mut aps, mut consensus) = init_state(h, config);
    let rho = config.penalty();
    let mut converged = false;
    for t in 1..=config.max_iters() {
        let omega_in = consensus.omega.clone();
        for state in &mut aps {
            local_step(state, h, &omega_in, config).map_err(|e| at_iteration(e, t))?;
        }
        let reports = aps
            .iter()
            .map(|ap| InterferenceReport {
                ap_index: ap.ap_index,
                z: ap.z.clone(),
            })
            .collect();
        let delivered = link.uplink(t, reports)?;
        let omega = consensus_update(num_aps, t, &delivered)?;
        let omega = link.downlink(t, omega)?;
        consensus.advance(t, omega, &aps, rho);
        for state in &mut aps {
            dual_update(&mut state.v, &state.z, &consensus.omega, rho);
        }
        converged = residuals_met(&consensus, &aps, config);
        if check_stop(&consensus, &aps, config) {
            break;
        }
    }
    let mut precoder = Precoder::zeros(num_aps, n, k_users);
    for state in &aps {
        for k in 0..k_users {
            precoder.set_vector(k, state.ap_index, state.precoding_vector(k, n));
        }
    }
    Ok(AdmmResult {
        total_power: precoder.total_power(),
        iterations_used: consensus.iteration,
        converged,
        trace: consensus.trace,
        precoder,
    })
}

fn at_iteration(e: Error, t: usize) -> Error {
    match e {
        Error::SolverFailure { status, ap, .. } => Error::SolverFailure {
            status,
            ap,
            iteration: Some(t),
        },
        other => other,
    }
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

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
