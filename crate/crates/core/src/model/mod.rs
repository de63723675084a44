//! System model: dimensions and physical parameters, seeded Rayleigh channel
//! realizations, and precoder storage shared by every optimization route.

mod channel;
mod config;
mod precoder;

pub use channel::{beta_from_snr_db, generate_channels, ChannelRealization};
pub use config::{SystemConfig, SystemConfigBuilder};
pub use precoder::Precoder;

/// dB -> linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio -> dB. Zero and negative inputs map to -inf.
pub fn linear_to_db(x: f64) -> f64 {
    if x > 0.0 {
        10.0 * x.log10()
    } else {
        f64::NEG_INFINITY
    }
}
