//! Event-driven timing model of one memory channel.
//!
//! The same model covers planar DRAM, stacked DRAM and SCM DIMMs: SCM differs
//! only in its timing vector (slow activation `t_RCD`, slow write restoration
//! `t_WR`, and the `t_RRDpre`/`t_RRDact` activation spacing).
//!
//! Banks keep their row open after an access (open-row policy). Closing a dirty
//! row costs a write restoration of `t_WR` before the precharge. Reads queue in
//! a bounded read queue scheduled FR-FCFS; writes go to a write buffer with one
//! row-sized entry per bank, which is drained in full (reads blocked) once it
//! fills, and once more at the end of the stream.
//!
//! Address mapping, from the least significant bits up:
//! `column | rank | bank | row`, each row-buffer-sized chunk of the address
//! space going to the next rank, then the next bank.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amat::burst_ns_for;
use crate::trace::Op;
use crate::BLOCK_BYTES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid timing: {0}")]
    Timing(String),
    #[error("request {index}: {size} bytes exceeds the {row}B row buffer")]
    TooLarge { index: usize, size: u64, row: u64 },
    #[error("request {index}: size {size} must be a positive multiple of 64 within one row")]
    BadShape { index: usize, size: u64 },
    #[error("request {index}: address {address:#x} outside device capacity")]
    OutOfRange { index: usize, address: u64 },
    #[error("request {index}: arrival time goes backwards")]
    Unordered { index: usize },
}

/// Timing vector in ns. The SCM read and write latencies are `t_rcd` and `t_wr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingParams {
    #[serde(rename = "tCAS")]
    pub t_cas: f64,
    #[serde(rename = "tRCD")]
    pub t_rcd: f64,
    #[serde(rename = "tRP")]
    pub t_rp: f64,
    #[serde(rename = "tRAS")]
    pub t_ras: f64,
    #[serde(rename = "tRC")]
    pub t_rc: f64,
    #[serde(rename = "tWR")]
    pub t_wr: f64,
    #[serde(rename = "tWTR")]
    pub t_wtr: f64,
    #[serde(rename = "tRTP")]
    pub t_rtp: f64,
    /// Activate-to-activate spacing within a rank.
    #[serde(rename = "tRRDpre")]
    pub t_rrd_pre: f64,
    /// Activate-to-activate spacing while a bank of the rank is restoring.
    #[serde(rename = "tRRDact")]
    pub t_rrd_act: f64,
    #[serde(rename = "data_rate")]
    pub data_rate_mts: f64,
    pub bus_bytes: u32,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self::ddr4_dram()
    }
}

impl TimingParams {
    /// DDR4-2666 planar DRAM: 14-14-14-24-38, tWR-tWTR-tRTP-tRRD 9-6-3-3.
    pub fn ddr4_dram() -> Self {
        Self {
            t_cas: 14.0,
            t_rcd: 14.0,
            t_rp: 14.0,
            t_ras: 24.0,
            t_rc: 38.0,
            t_wr: 9.0,
            t_wtr: 6.0,
            t_rtp: 3.0,
            t_rrd_pre: 3.0,
            t_rrd_act: 3.0,
            data_rate_mts: 2666.0,
            bus_bytes: 8,
        }
    }

    /// SCM on a DDR4-2666 interface: 14-read-14-24-read, write-6-3, tRRDpre/act 2/11.
    pub fn scm(t_read: f64, t_write: f64) -> Self {
        Self {
            t_rcd: t_read,
            t_rc: t_read,
            t_wr: t_write,
            t_rrd_pre: 2.0,
            t_rrd_act: 11.0,
            ..Self::ddr4_dram()
        }
    }

    /// 64B burst time on the channel.
    pub fn burst_ns(&self) -> f64 {
        burst_ns_for(self.data_rate_mts, self.bus_bytes)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let lat = [
            self.t_cas,
            self.t_rcd,
            self.t_rp,
            self.t_ras,
            self.t_rc,
            self.t_wr,
            self.t_wtr,
            self.t_rtp,
            self.t_rrd_pre,
            self.t_rrd_act,
        ];
        if lat.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(DeviceError::Timing("latencies must be finite and >= 0".into()));
        }
        if self.t_rc < self.t_rcd {
            return Err(DeviceError::Timing("tRC must be >= tRCD".into()));
        }
        if !(self.data_rate_mts > 0.0) || self.bus_bytes == 0 {
            return Err(DeviceError::Timing("data rate and bus width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceGeometry {
    pub ranks: u32,
    pub banks_per_rank: u32,
    #[serde(rename = "row_buffer")]
    pub row_buffer_bytes: u64,
    #[serde(default = "default_capacity")]
    pub capacity_bytes: u64,
    #[serde(default = "default_queue_depth")]
    pub queue_depth: usize,
}

fn default_capacity() -> u64 {
    32 << 30
}

fn default_queue_depth() -> usize {
    64
}

impl DeviceGeometry {
    /// Single channel, 2 ranks of 8 banks, 32GB, 64-entry queue.
    pub fn dual_rank(row_buffer_bytes: u64) -> Self {
        Self {
            ranks: 2,
            banks_per_rank: 8,
            row_buffer_bytes,
            capacity_bytes: default_capacity(),
            queue_depth: default_queue_depth(),
        }
    }

    pub fn banks(&self) -> usize {
        (self.ranks * self.banks_per_rank) as usize
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let rb = self.row_buffer_bytes;
        if !rb.is_power_of_two() || !(256..=8192).contains(&rb) {
            return Err(DeviceError::Geometry("row buffer must be a power of two in 256..=8192".into()));
        }
        if self.ranks == 0 || self.banks_per_rank == 0 {
            return Err(DeviceError::Geometry("ranks and banks_per_rank must be >= 1".into()));
        }
        if self.queue_depth == 0 {
            return Err(DeviceError::Geometry("queue_depth must be >= 1".into()));
        }
        if self.capacity_bytes < rb * self.banks() as u64 {
            return Err(DeviceError::Geometry("capacity smaller than one row per bank".into()));
        }
        Ok(())
    }

    /// (global bank index, rank, row) of an address.
    pub fn map(&self, address: u64) -> (usize, usize, u64) {
        let chunk = address / self.row_buffer_bytes;
        let ranks = self.ranks as u64;
        let banks = self.banks_per_rank as u64;
        let rank = chunk % ranks;
        let bank = (chunk / ranks) % banks;
        let row = chunk / (ranks * banks);
        ((rank * banks + bank) as usize, rank as usize, row)
    }
}

/// JSON device description: geometry plus a nested timing vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDescription {
    pub ranks: u32,
    pub banks_per_rank: u32,
    pub row_buffer: u64,
    #[serde(default = "default_capacity")]
    pub capacity_bytes: u64,
    #[serde(default = "default_queue_depth")]
    pub queue_depth: usize,
    #[serde(default)]
    pub timing: TimingParams,
}

impl DeviceDescription {
    pub fn geometry(&self) -> DeviceGeometry {
        DeviceGeometry {
            ranks: self.ranks,
            banks_per_rank: self.banks_per_rank,
            row_buffer_bytes: self.row_buffer,
            capacity_bytes: self.capacity_bytes,
            queue_depth: self.queue_depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BankState {
    Closed,
    OpenClean(u64),
    OpenDirty(u64),
}

/// Unloaded latency of one request against a bank in `state`.
///
/// A write is costed like a read: its command-to-buffer latency equals `t_CAS`.
/// The difference shows up in the next state, which is dirty.
pub fn service_latency(kind: Op, state: BankState, target_row: u64, n_bursts: u32, t: &TimingParams) -> f64 {
    let _ = kind;
    let data = t.t_cas + n_bursts as f64 * t.burst_ns();
    match state {
        BankState::OpenClean(r) | BankState::OpenDirty(r) if r == target_row => data,
        BankState::Closed => t.t_rcd + data,
        BankState::OpenClean(_) => t.t_rp + t.t_rcd + data,
        BankState::OpenDirty(_) => t.t_wr + t.t_rp + t.t_rcd + data,
    }
}

/// Bank state after serving a request.
pub fn next_bank_state(kind: Op, state: BankState, target_row: u64) -> BankState {
    match (kind, state) {
        (Op::Write, _) => BankState::OpenDirty(target_row),
        (Op::Read, BankState::OpenDirty(r)) if r == target_row => state,
        (Op::Read, _) => BankState::OpenClean(target_row),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SchedulingPolicy {
    /// Open-row, first-ready FCFS.
    #[default]
    #[serde(rename = "fr-fcfs")]
    OpenRowFrFcfs,
    /// Open-row, strict arrival order.
    #[serde(rename = "fcfs")]
    OpenRowFcfs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceRequest {
    pub arrival_ns: f64,
    pub op: Op,
    pub address: u64,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub request: usize,
    pub issue_ns: f64,
    pub data_start_ns: f64,
    pub finish_ns: f64,
    pub row_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceStats {
    pub served_requests: u64,
    pub reads: u64,
    pub writes: u64,
    pub row_hits: u64,
    pub activations: u64,
    /// Mean read latency divided by the request size in 64B blocks.
    pub loaded_amat_ns: f64,
    /// Mean read completion latency.
    pub mean_read_latency_ns: f64,
    pub row_hit_ratio: f64,
    /// Distinct bytes touched per activation.
    pub mean_bytes_per_activation: f64,
    pub read_queue_occupancy_mean: f64,
    pub write_queue_occupancy_mean: f64,
    pub write_drains: u64,
    /// Data-bus time spent transferring.
    pub busy_time_ns: f64,
    /// First arrival to last completion.
    pub span_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRun {
    pub stats: DeviceStats,
    /// In issue order.
    pub completions: Vec<Completion>,
}

#[derive(Debug, Clone, Copy)]
struct OpenRow {
    row: u64,
    dirty: bool,
    touched: u128,
}

#[derive(Debug, Clone, Copy)]
struct Bank {
    open: Option<OpenRow>,
    last_act: f64,
    last_col: f64,
    next_col: f64,
    restore_start: f64,
    restore_end: f64,
}

impl Default for Bank {
    fn default() -> Self {
        Self {
            open: None,
            last_act: f64::NEG_INFINITY,
            last_col: f64::NEG_INFINITY,
            next_col: 0.0,
            restore_start: 0.0,
            restore_end: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Rank {
    /// Scheduled activation times, sorted; may lie in the future.
    acts: Vec<f64>,
    last_write_end: f64,
}

/// Reservations of the shared data bus. Requests are scheduled into the
/// future at issue time, so a later request may fill an earlier gap.
#[derive(Debug, Default)]
struct DataBus {
    slots: Vec<(f64, f64)>,
    busy: f64,
}

impl DataBus {
    fn reserve(&mut self, earliest: f64, len: f64, now: f64) -> f64 {
        self.slots.retain(|&(_, end)| end > now);
        let mut start = earliest;
        let mut pos = 0;
        for (i, &(s, e)) in self.slots.iter().enumerate() {
            if start + len <= s {
                break;
            }
            if e > start {
                start = e;
            }
            pos = i + 1;
        }
        self.slots.insert(pos, (start, start + len));
        self.busy += len;
        start
    }
}

/// Slack for comparing scheduled times, well below any timing parameter.
const TIME_EPS_NS: f64 = 1e-9;

struct Channel<'a> {
    geo: &'a DeviceGeometry,
    t: &'a TimingParams,
    burst: f64,
    banks: Vec<Bank>,
    ranks: Vec<Rank>,
    bus: DataBus,
    activations: u64,
    activated_bytes: u64,
}

fn touched_mask(offset: u64, size: u64) -> u128 {
    let first = offset / BLOCK_BYTES;
    let n = size / BLOCK_BYTES;
    let ones = if n >= 128 { u128::MAX } else { (1u128 << n) - 1 };
    ones << first
}

impl Channel<'_> {
    fn row_of(&self, r: &DeviceRequest) -> (usize, u64) {
        let (bank, _, row) = self.geo.map(r.address);
        (bank, row)
    }

    fn is_hit(&self, r: &DeviceRequest) -> bool {
        let (bank, row) = self.row_of(r);
        self.banks[bank].open.is_some_and(|o| o.row == row)
    }

    fn ready(&self, r: &DeviceRequest, now: f64) -> bool {
        let (bank, _) = self.row_of(r);
        self.banks[bank].next_col <= now
    }

    fn restoring(&self, rank: usize, at: f64) -> bool {
        let per = self.geo.banks_per_rank as usize;
        self.banks[rank * per..(rank + 1) * per]
            .iter()
            .any(|b| b.restore_start <= at && at < b.restore_end)
    }

    /// Earliest activation at or after `from` that keeps every scheduled
    /// activation of the rank at least tRRDpre away (tRRDact while a bank of
    /// the rank is restoring).
    fn activation_slot(&mut self, rank: usize, from: f64, now: f64) -> f64 {
        let (pre, act) = (self.t.t_rrd_pre, self.t.t_rrd_act);
        let horizon = now - pre.max(act);
        self.ranks[rank].acts.retain(|&a| a > horizon);
        let mut at = from;
        loop {
            let spacing = if self.restoring(rank, at) { act } else { pre };
            match self.ranks[rank].acts.iter().find(|&&a| libm::fabs(at - a) < spacing - TIME_EPS_NS) {
                Some(&a) => at = a + spacing,
                None => break,
            }
        }
        let acts = &mut self.ranks[rank].acts;
        let pos = acts.partition_point(|&a| a <= at);
        acts.insert(pos, at);
        at
    }

    /// Issues `r` at `now`; returns (data start, finish, row hit).
    fn issue(&mut self, r: &DeviceRequest, now: f64) -> (f64, f64, bool) {
        let t = self.t;
        let (bank_idx, rank_idx, row) = self.geo.map(r.address);
        let n = (r.size_bytes / BLOCK_BYTES) as f64;
        let mask = touched_mask(r.address % self.geo.row_buffer_bytes, r.size_bytes);

        let bank = self.banks[bank_idx];
        let hit = bank.open.is_some_and(|o| o.row == row);
        let mut col = if hit {
            now.max(bank.next_col)
        } else {
            let mut t0 = now;
            let mut restore = None;
            if let Some(open) = bank.open {
                t0 = t0.max(bank.last_act + t.t_ras).max(bank.last_col + t.t_rtp);
                if open.dirty {
                    restore = Some((t0, t0 + t.t_wr));
                    t0 += t.t_wr;
                }
                t0 += t.t_rp;
                self.activated_bytes += open.touched.count_ones() as u64 * BLOCK_BYTES;
            }
            if let Some((s, e)) = restore {
                let b = &mut self.banks[bank_idx];
                b.restore_start = s;
                b.restore_end = e;
            }
            let act = self.activation_slot(rank_idx, t0.max(bank.last_act + t.t_rc), now);
            self.activations += 1;
            let b = &mut self.banks[bank_idx];
            b.last_act = act;
            b.open = Some(OpenRow {
                row,
                dirty: false,
                touched: 0,
            });
            act + t.t_rcd
        };
        if r.op == Op::Read {
            col = col.max(self.ranks[rank_idx].last_write_end + t.t_wtr);
        }
        let data_start = self.bus.reserve(col + t.t_cas, n * self.burst, now);
        let col = data_start - t.t_cas;
        let finish = data_start + n * self.burst;

        let b = &mut self.banks[bank_idx];
        b.next_col = col + n * self.burst;
        b.last_col = col + (n - 1.0) * self.burst;
        let open = b.open.as_mut().expect("row is open after issue");
        open.touched |= mask;
        if r.op == Op::Write {
            open.dirty = true;
            self.ranks[rank_idx].last_write_end = finish;
        }
        (data_start, finish, hit)
    }
}

fn check_requests(requests: &[DeviceRequest], geo: &DeviceGeometry) -> Result<(), DeviceError> {
    let mut prev = f64::NEG_INFINITY;
    for (index, r) in requests.iter().enumerate() {
        if r.size_bytes > geo.row_buffer_bytes {
            return Err(DeviceError::TooLarge {
                index,
                size: r.size_bytes,
                row: geo.row_buffer_bytes,
            });
        }
        let offset = r.address % geo.row_buffer_bytes;
        if r.size_bytes == 0
            || r.size_bytes % BLOCK_BYTES != 0
            || r.address % BLOCK_BYTES != 0
            || offset + r.size_bytes > geo.row_buffer_bytes
        {
            return Err(DeviceError::BadShape {
                index,
                size: r.size_bytes,
            });
        }
        if r.address + r.size_bytes > geo.capacity_bytes {
            return Err(DeviceError::OutOfRange {
                index,
                address: r.address,
            });
        }
        if !(r.arrival_ns >= prev) || !r.arrival_ns.is_finite() {
            return Err(DeviceError::Unordered { index });
        }
        prev = r.arrival_ns;
    }
    Ok(())
}

/// Runs the request stream through one channel.
pub fn simulate_device(
    requests: &[DeviceRequest],
    geo: &DeviceGeometry,
    timing: &TimingParams,
    policy: SchedulingPolicy,
) -> Result<DeviceRun, DeviceError> {
    geo.validate()?;
    timing.validate()?;
    check_requests(requests, geo)?;

    let mut ch = Channel {
        geo,
        t: timing,
        burst: timing.burst_ns(),
        banks: vec![Bank::default(); geo.banks()],
        ranks: vec![
            Rank {
                acts: Vec::new(),
                last_write_end: f64::NEG_INFINITY,
            };
            geo.ranks as usize
        ],
        bus: DataBus::default(),
        activations: 0,
        activated_bytes: 0,
    };

    let n = requests.len();
    let write_slots = geo.banks();
    let mut read_q: Vec<usize> = Vec::with_capacity(geo.queue_depth);
    let mut write_q: Vec<usize> = Vec::with_capacity(write_slots);
    let mut completions = Vec::with_capacity(n);
    let mut pending = 0usize;
    let mut draining = false;
    let mut drains = 0u64;
    let start = requests.first().map_or(0.0, |r| r.arrival_ns);
    let mut now = start;
    let (mut read_area, mut write_area) = (0.0f64, 0.0f64);

    while completions.len() < n {
        while pending < n && requests[pending].arrival_ns <= now {
            let q = match requests[pending].op {
                Op::Read if read_q.len() < geo.queue_depth => &mut read_q,
                Op::Write if write_q.len() < write_slots => &mut write_q,
                _ => break,
            };
            q.push(pending);
            pending += 1;
        }

        if !draining && (write_q.len() >= write_slots || (pending == n && read_q.is_empty() && !write_q.is_empty()))
        {
            draining = true;
            drains += 1;
        }
        if draining && write_q.is_empty() {
            draining = false;
        }

        let queue = if draining { &mut write_q } else { &mut read_q };
        let pick = match policy {
            SchedulingPolicy::OpenRowFrFcfs => {
                let ready = |&&i: &&usize| ch.ready(&requests[i], now);
                queue
                    .iter()
                    .filter(ready)
                    .position(|&i| ch.is_hit(&requests[i]))
                    .map(|p| queue.iter().filter(ready).nth(p).copied().expect("position is valid"))
                    .or_else(|| queue.iter().find(ready).copied())
            }
            SchedulingPolicy::OpenRowFcfs => queue.first().copied().filter(|&i| ch.ready(&requests[i], now)),
        };

        if let Some(idx) = pick {
            queue.retain(|&i| i != idx);
            let (data_start, finish, row_hit) = ch.issue(&requests[idx], now);
            completions.push(Completion {
                request: idx,
                issue_ns: now,
                data_start_ns: data_start,
                finish_ns: finish,
                row_hit,
            });
            continue;
        }

        // nothing issuable: jump to the next bank release or admissible arrival
        let mut next = f64::INFINITY;
        let waiting = match policy {
            SchedulingPolicy::OpenRowFrFcfs => &queue[..],
            SchedulingPolicy::OpenRowFcfs => &queue[..queue.len().min(1)],
        };
        for &i in waiting {
            let (bank, _) = ch.row_of(&requests[i]);
            next = next.min(ch.banks[bank].next_col);
        }
        if pending < n {
            let r = &requests[pending];
            let room = match r.op {
                Op::Read => read_q.len() < geo.queue_depth,
                Op::Write => write_q.len() < write_slots,
            };
            if room {
                next = next.min(r.arrival_ns);
            }
        }
        debug_assert!(next.is_finite() && next > now, "scheduler stalled at {now}");
        if !next.is_finite() {
            break;
        }
        read_area += read_q.len() as f64 * (next - now);
        write_area += write_q.len() as f64 * (next - now);
        now = next;
    }

    for b in &ch.banks {
        if let Some(open) = b.open {
            ch.activated_bytes += open.touched.count_ones() as u64 * BLOCK_BYTES;
        }
    }

    let mut stats = DeviceStats {
        served_requests: completions.len() as u64,
        activations: ch.activations,
        write_drains: drains,
        busy_time_ns: ch.bus.busy,
        ..DeviceStats::default()
    };
    let (mut amat_sum, mut lat_sum) = (0.0, 0.0);
    let mut end = start;
    for c in &completions {
        let r = &requests[c.request];
        end = end.max(c.finish_ns);
        if c.row_hit {
            stats.row_hits += 1;
        }
        match r.op {
            Op::Read => {
                stats.reads += 1;
                let lat = c.finish_ns - r.arrival_ns;
                lat_sum += lat;
                amat_sum += lat / (r.size_bytes / BLOCK_BYTES) as f64;
            }
            Op::Write => stats.writes += 1,
        }
    }
    stats.span_ns = end - start;
    if stats.reads > 0 {
        stats.loaded_amat_ns = amat_sum / stats.reads as f64;
        stats.mean_read_latency_ns = lat_sum / stats.reads as f64;
    }
    if stats.served_requests > 0 {
        stats.row_hit_ratio = stats.row_hits as f64 / stats.served_requests as f64;
    }
    if stats.activations > 0 {
        stats.mean_bytes_per_activation = ch.activated_bytes as f64 / stats.activations as f64;
    }
    if stats.span_ns > 0.0 {
        stats.read_queue_occupancy_mean = read_area / stats.span_ns;
        stats.write_queue_occupancy_mean = write_area / stats.span_ns;
    }

    Ok(DeviceRun { stats, completions })
}
