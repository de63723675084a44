use serde::Serialize;

use super::channel::beta_from_snr_db;
use crate::error::{Error, Result};

/// Immutable, validated system description: M access points with N antennas
/// each serve K single-antenna users. Indexing is `(user k, ap m)` throughout;
/// the large-scale matrix is stored row-major as `beta[k * M + m]`.
///
/// Once constructed the invariants hold for the lifetime of the value: all
/// dimensions are >= 1, noise powers and SINR targets are positive and of
/// length K, `relaxation_factor >= 1`, `penalty > 0`, and all tolerances are
/// positive. Values are cheap to clone and safe to share across threads.
#[derive(Debug, Clone, Serialize)]
pub struct SystemConfig {
    num_aps: usize,
    num_antennas: usize,
    num_users: usize,
    noise_power: Vec<f64>,
    large_scale: Vec<f64>,
    sinr_target: Vec<f64>,
    relaxation_factor: f64,
    /// Cached per-user relaxed amplitude target sqrt(c * gamma_k).
    gamma_hat: Vec<f64>,
    penalty: f64,
    max_iters: usize,
    primal_tol: f64,
    dual_tol: f64,
    rel_tol: f64,
    rng_seed: u64,
}

impl SystemConfig {
    pub fn builder() -> SystemConfigBuilder {
        SystemConfigBuilder::default()
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn noise_power(&self, user: usize) -> f64 {
        self.noise_power[user]
    }

    pub fn beta(&self, user: usize, ap: usize) -> f64 {
        self.large_scale[user * self.num_aps + ap]
    }

    /// Linear SINR target gamma_k.
    pub fn sinr_target(&self, user: usize) -> f64 {
        self.sinr_target[user]
    }

    pub fn sinr_targets(&self) -> &[f64] {
        &self.sinr_target
    }

    pub fn relaxation_factor(&self) -> f64 {
        self.relaxation_factor
    }

    /// Relaxed amplitude target sqrt(c * gamma_k) used by the distributed split.
    pub fn gamma_hat(&self, user: usize) -> f64 {
        self.gamma_hat[user]
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    pub fn primal_tol(&self) -> f64 {
        self.primal_tol
    }

    pub fn dual_tol(&self) -> f64 {
        self.dual_tol
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// Large-scale coefficients: either one SNR applied uniformly or an explicit
/// K x M matrix.
#[derive(Debug, Clone)]
enum LargeScale {
    UniformSnrDb(f64),
    Matrix(Vec<f64>),
}

/// Builder with the defaults used across the bundled experiments:
/// M=4, N=64, K=4, unit noise, 20 dB per-link SNR, 15 dB SINR target,
/// c=1, rho=10, 10 consensus iterations, seed 42.
#[derive(Debug, Clone)]
pub struct SystemConfigBuilder {
    num_aps: usize,
    num_antennas: usize,
    num_users: usize,
    noise_power: Vec<f64>,
    large_scale: LargeScale,
    sinr_target_db: Vec<f64>,
    relaxation_factor: f64,
    penalty: f64,
    max_iters: usize,
    primal_tol: f64,
    dual_tol: f64,
    rel_tol: f64,
    rng_seed: u64,
}

impl Default for SystemConfigBuilder {
    fn default() -> Self {
        Self {
            num_aps: 4,
            num_antennas: 64,
            num_users: 4,
            noise_power: vec![1.0],
            large_scale: LargeScale::UniformSnrDb(20.0),
            sinr_target_db: vec![15.0],
            relaxation_factor: 1.0,
            penalty: 10.0,
            max_iters: 10,
            primal_tol: 1e-4,
            dual_tol: 1e-4,
            rel_tol: 1e-3,
            rng_seed: 42,
        }
    }
}

impl SystemConfigBuilder {
    pub fn num_aps(mut self, m: usize) -> Self {
        self.num_aps = m;
        self
    }

    pub fn num_antennas(mut self, n: usize) -> Self {
        self.num_antennas = n;
        self
    }

    pub fn num_users(mut self, k: usize) -> Self {
        self.num_users = k;
        self
    }

    /// One noise power for every user.
    pub fn noise_power(mut self, sigma_sq: f64) -> Self {
        self.noise_power = vec![sigma_sq];
        self
    }

    pub fn per_user_noise_power(mut self, sigma_sq: Vec<f64>) -> Self {
        self.noise_power = sigma_sq;
        self
    }

    /// Per-link SNR beta/sigma^2 in dB, applied uniformly.
    pub fn snr_db(mut self, snr_db: f64) -> Self {
        self.large_scale = LargeScale::UniformSnrDb(snr_db);
        self
    }

    /// Explicit K x M large-scale matrix, row-major `beta[k * M + m]`.
    pub fn beta_matrix(mut self, beta: Vec<f64>) -> Self {
        self.large_scale = LargeScale::Matrix(beta);
        self
    }

    /// One SINR target (dB) for every user.
    pub fn sinr_target_db(mut self, gamma_db: f64) -> Self {
        self.sinr_target_db = vec![gamma_db];
        self
    }

    pub fn per_user_sinr_target_db(mut self, gamma_db: Vec<f64>) -> Self {
        self.sinr_target_db = gamma_db;
        self
    }

    pub fn relaxation_factor(mut self, c: f64) -> Self {
        self.relaxation_factor = c;
        self
    }

    pub fn penalty(mut self, rho: f64) -> Self {
        self.penalty = rho;
        self
    }

    pub fn max_iters(mut self, t: usize) -> Self {
        self.max_iters = t;
        self
    }

    pub fn primal_tol(mut self, tol: f64) -> Self {
        self.primal_tol = tol;
        self
    }

    pub fn dual_tol(mut self, tol: f64) -> Self {
        self.dual_tol = tol;
        self
    }

    pub fn rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn rng_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn build(self) -> Result<SystemConfig> {
        let (m, n, k) = (self.num_aps, self.num_antennas, self.num_users);
        if m == 0 || n == 0 || k == 0 {
            return Err(Error::Config(format!(
                "dimensions must be >= 1 (num_aps={m}, num_antennas={n}, num_users={k})"
            )));
        }
        let noise_power = broadcast_per_user(&self.noise_power, k, "noise_power")?;
        for (u, &s) in noise_power.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Config(format!("noise_power[{u}] = {s} must be positive")));
            }
        }
        let gamma_db = broadcast_per_user(&self.sinr_target_db, k, "sinr_target_db")?;
        let sinr_target: Vec<f64> = gamma_db.iter().map(|&g| super::db_to_linear(g)).collect();
        let large_scale = match self.large_scale {
            LargeScale::UniformSnrDb(snr_db) => {
                if !snr_db.is_finite() {
                    return Err(Error::Config(format!("snr_db = {snr_db} must be finite")));
                }
                let mut beta = Vec::with_capacity(k * m);
                for u in 0..k {
                    beta.extend(std::iter::repeat(beta_from_snr_db(snr_db, noise_power[u])).take(m));
                }
                beta
            }
            LargeScale::Matrix(beta) => {
                if beta.len() != k * m {
                    return Err(Error::Config(format!(
                        "beta matrix has {} entries, expected K*M = {}",
                        beta.len(),
                        k * m
                    )));
                }
                if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
                    return Err(Error::Config("beta entries must be finite and >= 0".into()));
                }
                beta
            }
        };
        if !(self.relaxation_factor >= 1.0) {
            return Err(Error::Config(format!(
                "relaxation_factor = {} must be >= 1",
                self.relaxation_factor
            )));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Config(format!("penalty = {} must be > 0", self.penalty)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        for (name, tol) in [
            ("primal_tol", self.primal_tol),
            ("dual_tol", self.dual_tol),
            ("rel_tol", self.rel_tol),
        ] {
            if !(tol > 0.0) {
                return Err(Error::Config(format!("{name} = {tol} must be > 0")));
            }
        }
        let gamma_hat = sinr_target
            .iter()
            .map(|&g| (self.relaxation_factor * g).sqrt())
            .collect();
        Ok(SystemConfig {
            num_aps: m,
            num_antennas: n,
            num_users: k,
            noise_power,
            large_scale,
            sinr_target,
            relaxation_factor: self.relaxation_factor,
            gamma_hat,
            penalty: self.penalty,
            max_iters: self.max_iters,
            primal_tol: self.primal_tol,
            dual_tol: self.dual_tol,
            rel_tol: self.rel_tol,
            rng_seed: self.rng_seed,
        })
    }
}

/// Accepts either a single value (applied to all K users) or exactly K values.
fn broadcast_per_user(values: &[f64], k: usize, name: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; k]),
        len if len == k => Ok(values.to_vec()),
        len => Err(Error::Config(format!(
            "{name} has {len} entries, expected 1 or K = {k}"
        ))),
    }
}
