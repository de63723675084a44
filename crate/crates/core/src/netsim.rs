//! Star-topology fronthaul simulation: every AP is wired to the central
//! node only. Messages carry either interference declarations (distributed
//! scheme) or raw channel/precoder blocks (centralized scheme); byte
//! accounting uses 8 bytes per real scalar and 16 per complex.
//!
//! Links are lossless, in-order, and zero-latency; a per-link latency knob
//! exists for the log records but injects no behavior.

use num_complex::Complex64;
use serde::Serialize;

use crate::admm::{self, AdmmResult, Fronthaul, InterferenceReport};
use crate::error::Result;
use crate::model::{ChannelRealization, SystemConfig};

pub const BYTES_PER_REAL: usize = 8;
pub const BYTES_PER_COMPLEX: usize = 16;

/// Fronthaul data-sharing schemes compared in the byte accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Full CSI upload to the central node, precoder download back.
    Centralized,
    /// This crate's consensus scheme: interference sums up, average down.
    AdmmCellFree,
    /// Reference row: cellular ADMM exchanging per-neighbor interference,
    /// M*(M-1)*K reals per round.
    AdmmCellular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Uplink,
    Downlink,
}

/// Everything that can cross the star fronthaul.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    InterferenceReport {
        ap_index: usize,
        iteration: usize,
        z: Vec<f64>,
    },
    ConsensusBroadcast {
        iteration: usize,
        omega: Vec<f64>,
    },
    ChannelUpload {
        ap_index: usize,
        coefficients: Vec<Complex64>,
    },
    PrecoderDownload {
        ap_index: usize,
        coefficients: Vec<Complex64>,
    },
}

impl Message {
    /// Payload scalars in real-equivalents: a complex counts as 2.
    pub fn scalar_count(&self) -> usize {
        match self {
            Message::InterferenceReport { z, .. } => z.len(),
            Message::ConsensusBroadcast { omega, .. } => omega.len(),
            Message::ChannelUpload { coefficients, .. }
            | Message::PrecoderDownload { coefficients, .. } => 2 * coefficients.len(),
        }
    }

    pub fn payload_bytes(&self) -> usize {
        match self {
            Message::InterferenceReport { z, .. } => z.len() * BYTES_PER_REAL,
            Message::ConsensusBroadcast { omega, .. } => omega.len() * BYTES_PER_REAL,
            Message::ChannelUpload { coefficients, .. }
            | Message::PrecoderDownload { coefficients, .. } => {
                coefficients.len() * BYTES_PER_COMPLEX
            }
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Message::InterferenceReport { .. } | Message::ChannelUpload { .. } => {
                Direction::Uplink
            }
            Message::ConsensusBroadcast { .. } | Message::PrecoderDownload { .. } => {
                Direction::Downlink
            }
        }
    }
}

/// One logged fronthaul exchange.
#[derive(Debug, Clone, Serialize)]
pub struct CommRecord {
    pub scheme: Scheme,
    pub iteration: usize,
    pub direction: Direction,
    pub messages: usize,
    pub scalar_count: usize,
    pub bytes: usize,
}

/// Append-only log of fronthaul traffic; totals re-derivable from records.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CommLog {
    pub records: Vec<CommRecord>,
}

impl CommLog {
    fn log(&mut self, scheme: Scheme, iteration: usize, batch: &[Message]) {
        let mut up = (0usize, 0usize, 0usize);
        let mut down = (0usize, 0usize, 0usize);
        for msg in batch {
            let slot = match msg.direction() {
                Direction::Uplink => &mut up,
                Direction::Downlink => &mut down,
            };
            slot.0 += 1;
            slot.1 += msg.scalar_count();
            slot.2 += msg.payload_bytes();
        }
        for (direction, (messages, scalar_count, bytes)) in
            [(Direction::Uplink, up), (Direction::Downlink, down)]
        {
            if messages > 0 {
                self.records.push(CommRecord {
                    scheme,
                    iteration,
                    direction,
                    messages,
                    scalar_count,
                    bytes,
                });
            }
        }
    }

    pub fn total_bytes(&self) -> usize {
        self.records.iter().map(|r| r.bytes).sum()
    }

    pub fn bytes_in(&self, direction: Direction) -> usize {
        self.records
            .iter()
            .filter(|r| r.direction == direction)
            .map(|r| r.bytes)
            .sum()
    }

    pub fn message_count(&self) -> usize {
        self.records.iter().map(|r| r.messages).sum()
    }

    pub fn total_scalars(&self) -> usize {
        self.records.iter().map(|r| r.scalar_count).sum()
    }
}

/// Transport that forwards everything unchanged while logging each
/// iteration's uplink reports and one downlink broadcast.
pub struct StarFronthaul {
    log: CommLog,
    /// Reserved latency knob; recorded nowhere yet, injects nothing.
    pub link_latency_ms: f64,
}

impl StarFronthaul {
    pub fn new() -> Self {
        Self {
            log: CommLog::default(),
            link_latency_ms: 0.0,
        }
    }

    pub fn into_log(self) -> CommLog {
        self.log
    }
}

impl Default for StarFronthaul {
    fn default() -> Self {
        Self::new()
    }
}

impl Fronthaul for StarFronthaul {
    fn uplink(
        &mut self,
        iteration: usize,
        reports: Vec<InterferenceReport>,
    ) -> Result<Vec<InterferenceReport>> {
        let batch: Vec<Message> = reports
            .iter()
            .map(|r| Message::InterferenceReport {
                ap_index: r.ap_index,
                iteration,
                z: r.z.clone(),
            })
            .collect();
        self.log.log(Scheme::AdmmCellFree, iteration, &batch);
        Ok(reports)
    }

    fn downlink(&mut self, iteration: usize, omega: Vec<f64>) -> Result<Vec<f64>> {
        let batch = [Message::ConsensusBroadcast {
            iteration,
            omega: omega.clone(),
        }];
        self.log.log(Scheme::AdmmCellFree, iteration, &batch);
        Ok(omega)
    }
}

/// Runs the consensus scheme through the logged star fronthaul. The
/// transport is lossless and order-preserving, so the result is
/// bit-identical to calling the solver directly.
pub fn run_distributed_protocol(
    h: &ChannelRealization,
    config: &SystemConfig,
) -> Result<(AdmmResult, CommLog)> {
    let mut link = StarFronthaul::new();
    let result = admm::run_admm_with(h, config, &mut link)?;
    Ok((result, link.into_log()))
}

/// Closed-form fronthaul footprint of one scheme.
#[derive(Debug, Clone, Serialize)]
pub struct CommVolume {
    pub scheme: Scheme,
    /// Real-equivalent scalars in one shared-data exchange: the quantity
    /// Table-style comparisons use (complex counts as 2 reals).
    pub per_exchange_scalars: usize,
    pub per_exchange_bytes: usize,
    /// Shared-data bytes multiplied by the iteration count (centralized
    /// uploads CSI once; iterative schemes pay per iteration).
    pub total_bytes: usize,
    /// One K-real consensus broadcast per iteration (star topology).
    pub broadcast_bytes_per_iteration: usize,
    /// The unicast alternative: the same broadcast sent per-AP.
    pub broadcast_unicast_bytes_per_iteration: usize,
    /// Centralized only: precoder blocks pushed back to the APs.
    pub precoder_download_bytes: usize,
}

/// Byte accounting as a pure function of the dimensions.
///
/// Shared-data scalar counts per exchange: centralized M*N*K complex
/// (CSI upload), cell-free ADMM M*K reals (interference sums), cellular
/// ADMM M*(M-1)*K reals (per-neighbor interference copies).
pub fn comm_volume(
    scheme: Scheme,
    num_aps: usize,
    num_antennas: usize,
    num_users: usize,
    iterations: usize,
) -> CommVolume {
    let (m, n, k) = (num_aps, num_antennas, num_users);
    let (per_exchange_scalars, per_exchange_bytes, exchanges) = match scheme {
        Scheme::Centralized => (2 * m * n * k, m * n * k * BYTES_PER_COMPLEX, 1),
        Scheme::AdmmCellFree => (m * k, m * k * BYTES_PER_REAL, iterations),
        Scheme::AdmmCellular => (m * (m - 1) * k, m * (m - 1) * k * BYTES_PER_REAL, iterations),
    };
    let precoder_download_bytes = match scheme {
        Scheme::Centralized => m * n * k * BYTES_PER_COMPLEX,
        _ => 0,
    };
    let broadcast = match scheme {
        Scheme::AdmmCellFree => k * BYTES_PER_REAL,
        _ => 0,
    };
    CommVolume {
        scheme,
        per_exchange_scalars,
        per_exchange_bytes,
        total_bytes: per_exchange_bytes * exchanges,
        broadcast_bytes_per_iteration: broadcast,
        broadcast_unicast_bytes_per_iteration: broadcast * m,
        precoder_download_bytes,
    }
}

/// Builds the centralized scheme's message log without running a solver:
/// M channel uploads, M precoder downloads.
pub fn centralized_exchange_log(num_aps: usize, num_antennas: usize, num_users: usize) -> CommLog {
    let mut log = CommLog::default();
    let block = vec![Complex64::new(0.0, 0.0); num_antennas * num_users];
    let uploads: Vec<Message> = (0..num_aps)
        .map(|m| Message::ChannelUpload {
            ap_index: m,
            coefficients: block.clone(),
        })
        .collect();
    log.log(Scheme::Centralized, 0, &uploads);
    let downloads: Vec<Message> = (0..num_aps)
        .map(|m| Message::PrecoderDownload {
            ap_index: m,
            coefficients: block.clone(),
        })
        .collect();
    log.log(Scheme::Centralized, 0, &downloads);
    log
}
