//! Closed-form unloaded access time per 64B as a function of transfer size.
//!
//! A transfer of `T` bytes is `n = T / 64` bursts behind one activation (and an
//! optional write restoration), so the per-block cost is
//! `(t_act + t_wr + n * t_burst) / n`. It falls toward `t_burst` as `T` grows.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::BLOCK_BYTES;

/// 64B burst time on a DDR4-2666 x64 channel, rounded to 10ps.
pub const DDR4_2666_BURST_NS: f64 = 3.0;

/// Time to move 64B over a channel of `bus_bytes` at `data_rate_mts`, rounded
/// to 10ps (DDR4-2666 gives 3.00ns).
pub fn burst_ns_for(data_rate_mts: f64, bus_bytes: u32) -> f64 {
    let exact = BLOCK_BYTES as f64 * 1000.0 / (data_rate_mts * bus_bytes as f64);
    libm::round(exact * 100.0) / 100.0
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmatError {
    #[error("transfer size {0} must be a positive multiple of 64")]
    BadTransfer(u64),
    #[error("latencies and burst time must be non-negative and finite")]
    BadLatency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmatQuery {
    /// Row activation latency (t_RCD).
    pub t_act_ns: f64,
    /// Restoration charged once per transfer; 0 for clean reads.
    pub t_wr_ns: f64,
    pub transfer_bytes: u64,
    pub burst_ns: f64,
}

impl AmatQuery {
    pub fn new(t_act_ns: f64, t_wr_ns: f64, transfer_bytes: u64, burst_ns: f64) -> Result<Self, AmatError> {
        if transfer_bytes == 0 || transfer_bytes % BLOCK_BYTES != 0 {
            return Err(AmatError::BadTransfer(transfer_bytes));
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(t_act_ns) && ok(t_wr_ns) && ok(burst_ns)) {
            return Err(AmatError::BadLatency);
        }
        Ok(Self {
            t_act_ns,
            t_wr_ns,
            transfer_bytes,
            burst_ns,
        })
    }

    /// Clean read over DDR4-2666.
    pub fn read(t_act_ns: f64, transfer_bytes: u64) -> Result<Self, AmatError> {
        Self::new(t_act_ns, 0.0, transfer_bytes, DDR4_2666_BURST_NS)
    }
}

/// Amortized latency per 64B block, in ns.
pub fn amat_unloaded(q: &AmatQuery) -> f64 {
    let n = (q.transfer_bytes / BLOCK_BYTES) as f64;
    (q.t_act_ns + q.t_wr_ns + n * q.burst_ns) / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmatRow {
    pub t_act: f64,
    pub transfer_bytes: u64,
    pub amat_ns: f64,
}

/// Tabulates clean-read AMAT over the grid, activation-major.
pub fn amat_curve(t_acts: &[f64], sizes: &[u64], burst_ns: f64) -> Result<Vec<AmatRow>, AmatError> {
    let mut rows = Vec::with_capacity(t_acts.len() * sizes.len());
    for &t_act in t_acts {
        for &size in sizes {
            let q = AmatQuery::new(t_act, 0.0, size, burst_ns)?;
            rows.push(AmatRow {
                t_act,
                transfer_bytes: size,
                amat_ns: amat_unloaded(&q),
            });
        }
    }
    Ok(rows)
}

/// Power-of-two transfer sizes from `lo` to `hi` inclusive.
pub fn pow2_sizes(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut s = lo.max(1).next_power_of_two();
    while s <= hi {
        out.push(s);
        s *= 2;
    }
    out
}
