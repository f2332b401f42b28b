//! End-to-end two-tier runs: the page cache in front of one memory channel.
//!
//! The cache runs first and produces a block-granular back-side stream. Each
//! back-side request inherits the arrival time of the access that caused it,
//! and the device runs open loop on that stream. The access time seen by the
//! processor is
//!
//! `tag_lookup + hit_service + miss_ratio * mean_fill_latency`
//!
//! and the performance proxy is `compute / (compute + amat)`, where `compute`
//! is the non-memory time per access. The ratio of two proxies is
//! `(compute + amat_baseline) / (compute + amat_config)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{simulate_cache, BacksideEvent, BacksideKind, CacheConfig, CacheError, CacheStats};
use crate::memdev::{
    simulate_device, DeviceError, DeviceGeometry, DeviceRequest, DeviceStats, SchedulingPolicy, TimingParams,
};
use crate::trace::{Op, Trace};
use crate::BLOCK_BYTES;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("cache block {block}B is larger than the {row}B row buffer")]
    BlockExceedsRow { block: u64, row: u64 },
    #[error("compute time and hit service must be non-negative, compute positive")]
    BadOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyOptions {
    /// Non-memory time per access; also the default access spacing.
    pub compute_ns_per_access: f64,
    /// Cache data access after the tag lookup (stacked DRAM plus link).
    pub hit_service_ns: f64,
    pub policy: SchedulingPolicy,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self {
            compute_ns_per_access: 50.0,
            hit_service_ns: 10.0,
            policy: SchedulingPolicy::OpenRowFrFcfs,
        }
    }
}

impl HierarchyOptions {
    fn validate(&self) -> Result<(), HierarchyError> {
        if !(self.compute_ns_per_access > 0.0) || !(self.hit_service_ns >= 0.0) {
            return Err(HierarchyError::BadOptions);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStats {
    /// `None` for a cacheless run.
    pub cache: Option<CacheStats>,
    pub device: DeviceStats,
    pub hit_latency_ns: f64,
    pub miss_ratio: f64,
    pub end_to_end_amat_ns: f64,
    pub perf_proxy: f64,
}

/// Performance of `config` relative to `baseline`.
pub fn relative_perf(config: &HierarchyStats, baseline: &HierarchyStats) -> f64 {
    config.perf_proxy / baseline.perf_proxy
}

/// Arrival time of every record: its own offset when present, otherwise one
/// access per `compute_ns`.
pub fn arrival_times(trace: &Trace, compute_ns: f64) -> Vec<f64> {
    trace
        .iter()
        .enumerate()
        .map(|(i, r)| r.arrival_offset_ns.map_or(i as f64 * compute_ns, |t| t as f64))
        .collect()
}

/// Timestamps a back-side stream from the trace it was produced from.
pub fn backside_requests(trace: &Trace, events: &[BacksideEvent], arrivals: &[f64]) -> Vec<DeviceRequest> {
    let records = trace.records();
    let mut cursor = 0usize;
    events
        .iter()
        .map(|e| {
            while records[cursor].seq != e.cause_seq {
                cursor += 1;
            }
            DeviceRequest {
                arrival_ns: arrivals[cursor],
                op: match e.kind {
                    BacksideKind::FillRead => Op::Read,
                    BacksideKind::Writeback => Op::Write,
                },
                address: e.address,
                size_bytes: e.size_bytes,
            }
        })
        .collect()
}

/// Cache-side half of a run. It depends only on the trace and the cache, so
/// one stage serves every device timing.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheStage {
    pub config: CacheConfig,
    pub options: HierarchyOptions,
    pub stats: CacheStats,
    pub requests: Vec<DeviceRequest>,
}

pub fn cache_stage(trace: &Trace, config: &CacheConfig, options: &HierarchyOptions) -> Result<CacheStage, HierarchyError> {
    options.validate()?;
    let (stats, events) = simulate_cache(trace, config)?;
    let arrivals = arrival_times(trace, options.compute_ns_per_access);
    let requests = backside_requests(trace, &events, &arrivals);
    Ok(CacheStage {
        config: config.clone(),
        options: *options,
        stats,
        requests,
    })
}

/// Device-side half of a run.
pub fn device_stage(
    stage: &CacheStage,
    geometry: &DeviceGeometry,
    timing: &TimingParams,
) -> Result<HierarchyStats, HierarchyError> {
    if stage.config.block_bytes > geometry.row_buffer_bytes {
        return Err(HierarchyError::BlockExceedsRow {
            block: stage.config.block_bytes,
            row: geometry.row_buffer_bytes,
        });
    }
    let run = simulate_device(&stage.requests, geometry, timing, stage.options.policy)?;
    let hit_latency_ns = stage.config.tag_lookup_ns + stage.options.hit_service_ns;
    let miss_ratio = stage.stats.miss_ratio();
    let amat = hit_latency_ns + miss_ratio * run.stats.mean_read_latency_ns;
    Ok(HierarchyStats {
        cache: Some(stage.stats.clone()),
        device: run.stats,
        hit_latency_ns,
        miss_ratio,
        end_to_end_amat_ns: amat,
        perf_proxy: proxy(stage.options.compute_ns_per_access, amat),
    })
}

fn proxy(compute: f64, amat: f64) -> f64 {
    compute / (compute + amat)
}

/// Cache plus device over one trace.
pub fn simulate_hierarchy(
    trace: &Trace,
    cache: &CacheConfig,
    geometry: &DeviceGeometry,
    timing: &TimingParams,
    options: &HierarchyOptions,
) -> Result<HierarchyStats, HierarchyError> {
    if cache.block_bytes > geometry.row_buffer_bytes {
        return Err(HierarchyError::BlockExceedsRow {
            block: cache.block_bytes,
            row: geometry.row_buffer_bytes,
        });
    }
    device_stage(&cache_stage(trace, cache, options)?, geometry, timing)
}

/// Memory without a cache: every 64B access goes to the device.
pub fn simulate_flat(
    trace: &Trace,
    geometry: &DeviceGeometry,
    timing: &TimingParams,
    options: &HierarchyOptions,
) -> Result<HierarchyStats, HierarchyError> {
    options.validate()?;
    let arrivals = arrival_times(trace, options.compute_ns_per_access);
    let requests: Vec<DeviceRequest> = trace
        .iter()
        .zip(&arrivals)
        .map(|(r, &t)| DeviceRequest {
            arrival_ns: t,
            op: r.op,
            address: r.address,
            size_bytes: BLOCK_BYTES,
        })
        .collect();
    let run = simulate_device(&requests, geometry, timing, options.policy)?;
    let amat = run.stats.mean_read_latency_ns;
    Ok(HierarchyStats {
        cache: None,
        device: run.stats,
        hit_latency_ns: 0.0,
        miss_ratio: 1.0,
        end_to_end_amat_ns: amat,
        perf_proxy: proxy(options.compute_ns_per_access, amat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_trace, SyntheticTraceSpec, TraceRecord};

    fn zipf_trace() -> Trace {
        generate_trace(&SyntheticTraceSpec {
            n_pages: 4096,
            zipf_alpha: 0.9,
            read_fraction: 0.7,
            footprint_mean: 32.0,
            burst_contiguity: 0.9,
            n_records: 100_000,
            seed: 4,
            inter_arrival_ns: None,
        })
        .unwrap()
    }

    #[test]
    fn self_baseline_is_one() {
        let t = zipf_trace();
        let cache = CacheConfig::new(512 * 1024, 1024, 4);
        let geo = DeviceGeometry::dual_rank(8192);
        let dram = TimingParams::ddr4_dram();
        let opts = HierarchyOptions::default();
        let a = simulate_hierarchy(&t, &cache, &geo, &dram, &opts).unwrap();
        let b = simulate_hierarchy(&t, &cache, &geo, &dram, &opts).unwrap();
        assert_eq!(relative_perf(&a, &b), 1.0);
        assert!(a.end_to_end_amat_ns >= a.hit_latency_ns);
        assert_eq!(a.hit_latency_ns, 30.0);
    }

    #[test]
    fn hitting_trace_ignores_device_timing() {
        let recs: Vec<_> = (0..10_000u64).map(|i| TraceRecord::new(i, Op::Read, (i % 16) * 64)).collect();
        let t = Trace::new(recs).unwrap();
        let cache = CacheConfig::new(64 * 1024, 1024, 4);
        let geo = DeviceGeometry::dual_rank(1024);
        let opts = HierarchyOptions::default();
        let fast = simulate_hierarchy(&t, &cache, &geo, &TimingParams::scm(60.0, 150.0), &opts).unwrap();
        let slow = simulate_hierarchy(&t, &cache, &geo, &TimingParams::scm(1000.0, 4000.0), &opts).unwrap();
        assert_eq!(fast.miss_ratio, 1e-4);
        assert_eq!(fast.end_to_end_amat_ns, 30.0 + 1e-4 * fast.device.mean_read_latency_ns);
        assert!(slow.end_to_end_amat_ns - fast.end_to_end_amat_ns < 0.2);
    }

    #[test]
    fn scm_close_to_dram_with_page_cache() {
        let t = zipf_trace();
        let cap = crate::cache::capacity_for_fraction(t.footprint_bytes(), 0.03, 4);
        let cache = CacheConfig::new(cap, 2048, 4);
        let geo = DeviceGeometry::dual_rank(2048);
        let opts = HierarchyOptions::default();
        let dram = simulate_hierarchy(&t, &cache, &geo, &TimingParams::ddr4_dram(), &opts).unwrap();
        let scm = simulate_hierarchy(&t, &cache, &geo, &TimingParams::scm(60.0, 150.0), &opts).unwrap();
        let r = relative_perf(&scm, &dram);
        assert!((0.9..=1.0).contains(&r), "{r}");
    }

    #[test]
    fn rejects_block_larger_than_row() {
        let t = zipf_trace();
        let err = simulate_hierarchy(
            &t,
            &CacheConfig::new(1 << 20, 4096, 4),
            &DeviceGeometry::dual_rank(2048),
            &TimingParams::ddr4_dram(),
            &HierarchyOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, HierarchyError::BlockExceedsRow { block: 4096, row: 2048 });
    }

    #[test]
    fn backside_inherits_arrivals() {
        let recs = vec![
            TraceRecord::new(5, Op::Write, 0),
            TraceRecord::new(9, Op::Read, 4096),
        ];
        let t = Trace::new(recs).unwrap();
        let stage = cache_stage(&t, &CacheConfig::new(4096, 4096, 1), &HierarchyOptions::default()).unwrap();
        let times: Vec<(f64, Op)> = stage.requests.iter().map(|r| (r.arrival_ns, r.op)).collect();
        assert_eq!(times, vec![(0.0, Op::Read), (50.0, Op::Write), (50.0, Op::Read)]);
    }

    #[test]
    fn flat_dram_run() {
        let t = zipf_trace();
        let s = simulate_flat(
            &t,
            &DeviceGeometry::dual_rank(8192),
            &TimingParams::ddr4_dram(),
            &HierarchyOptions::default(),
        )
        .unwrap();
        assert_eq!(s.device.served_requests, t.len() as u64);
        assert!(s.end_to_end_amat_ns >= 17.0);
    }
}
