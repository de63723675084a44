//! Downlink precoder design for cell-free massive MIMO: a centralized
//! second-order cone formulation and an ADMM consensus scheme that splits the
//! same problem across access points, plus the channel model, a conjugate
//! beamforming baseline, fronthaul accounting, and evaluation metrics they
//! share.

pub mod admm;
pub mod baseline;
pub mod centralized;
pub mod conic;
pub mod error;
mod lift;
pub mod metrics;
pub mod model;
pub mod netsim;

pub use error::{Error, Result};
pub use model::{ChannelRealization, Precoder, SystemConfig, SystemConfigBuilder};
