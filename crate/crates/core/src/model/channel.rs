use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SystemConfig;

/// One i.i.d. Rayleigh channel draw: h_km ~ CN(0, beta_km * I_N) for every
/// (user k, ap m) pair, stored as contiguous length-N blocks indexed like the
/// precoder (`(k * M + m) * N`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_aps: usize,
    num_antennas: usize,
    num_users: usize,
    realization_index: u64,
    h: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn realization_index(&self) -> u64 {
        self.realization_index
    }

    /// Channel vector h_km between user `k` and ap `m`.
    pub fn vector(&self, user: usize, ap: usize) -> &[Complex64] {
        let start = (user * self.num_aps + ap) * self.num_antennas;
        &self.h[start..start + self.num_antennas]
    }

    pub fn norm_sq(&self, user: usize, ap: usize) -> f64 {
        self.vector(user, ap).iter().map(|h| h.norm_sqr()).sum()
    }

    /// Sum of ||h_km||^2 over all aps: the stacked-channel energy for user k.
    pub fn stacked_norm_sq(&self, user: usize) -> f64 {
        (0..self.num_aps).map(|m| self.norm_sq(user, m)).sum()
    }

    /// True when every ap's channel to `user` is identically zero.
    pub fn user_channel_is_zero(&self, user: usize) -> bool {
        self.stacked_norm_sq(user) == 0.0
    }

    /// Test-support constructor taking explicit coefficients in the layout
    /// documented on the type.
    pub fn from_coefficients(
        num_aps: usize,
        num_antennas: usize,
        num_users: usize,
        h: Vec<Complex64>,
    ) -> Self {
        assert_eq!(h.len(), num_aps * num_antennas * num_users);
        Self {
            num_aps,
            num_antennas,
            num_users,
            realization_index: 0,
            h,
        }
    }
}

/// Large-scale coefficient from a per-link SNR: beta = sigma^2 * 10^(snr/10).
pub fn beta_from_snr_db(snr_db: f64, noise_power: f64) -> f64 {
    noise_power * 10f64.powf(snr_db / 10.0)
}

/// Draws the channel for `realization_index`. Each (k, m) link uses its own
/// counter-derived stream keyed on (rng_seed, realization_index, k, m), so
/// realizations can be generated in any order, in parallel, and still
/// reproduce bit-identically.
pub fn generate_channels(config: &SystemConfig, realization_index: u64) -> ChannelRealization {
    let (m_aps, n_ant, k_users) = (
        config.num_aps(),
        config.num_antennas(),
        config.num_users(),
    );
    let mut h = Vec::with_capacity(k_users * m_aps * n_ant);
    for k in 0..k_users {
        for m in 0..m_aps {
            let beta = config.beta(k, m);
            if beta == 0.0 {
                h.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(n_ant));
                continue;
            }
            let mut rng = link_rng(config.rng_seed(), realization_index, k as u64, m as u64);
            let scale = (beta / 2.0).sqrt();
            for _ in 0..n_ant {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                h.push(Complex64::new(scale * re, scale * im));
            }
        }
    }
    ChannelRealization {
        num_aps: m_aps,
        num_antennas: n_ant,
        num_users: k_users,
        realization_index,
        h,
    }
}

/// SplitMix64 step; the standard finalizer gives well-mixed, distinct streams
/// for distinct (seed, realization, k, m) keys.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn link_rng(seed: u64, realization: u64, k: u64, m: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mix = |v: u64, s: &mut u64| {
        *s ^= v.wrapping_mul(0xff51afd7ed558ccd).rotate_left(17);
        splitmix64(s)
    };
    let a = mix(realization, &mut state);
    let b = mix(k, &mut state);
    let c = mix(m, &mut state);
    let d = splitmix64(&mut state);
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&a.to_le_bytes());
    bytes[8..16].copy_from_slice(&b.to_le_bytes());
    bytes[16..24].copy_from_slice(&c.to_le_bytes());
    bytes[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}
