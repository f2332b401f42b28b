//! Set-associative, page-based DRAM cache.
//!
//! Write-back, write-allocate, LRU within each set. Every resident block keeps
//! a bitmap of the 64B sub-blocks touched since its fill; the population count
//! is sampled into the density histogram when the block leaves the cache, and
//! blocks still resident at the end of the trace are sampled by a final flush.
//! The flush only feeds the histogram: it does not generate writebacks.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Trace, TraceRecord};
use crate::{BLOCK_BYTES, PAGE_BYTES};

/// Default associativity.
pub const DEFAULT_WAYS: u32 = 4;
/// Default SRAM tag lookup latency.
pub const DEFAULT_TAG_LOOKUP_NS: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CacheError {
    #[error("block size {0} must be a power of two in 64..=4096")]
    InvalidBlockSize(u64),
    #[error("associativity must be at least 1")]
    ZeroWays,
    #[error("block size {block} exceeds capacity/ways ({per_way})")]
    BlockExceedsWay { block: u64, per_way: u64 },
    #[error("capacity {capacity} is not divisible by block size x ways ({set_bytes})")]
    Indivisible { capacity: u64, set_bytes: u64 },
    #[error("warmup fraction {0} must be in [0, 1)")]
    InvalidWarmup(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    pub block_bytes: u64,
    #[serde(default = "default_ways")]
    pub ways: u32,
    #[serde(default = "default_tag_lookup")]
    pub tag_lookup_ns: f64,
    /// Leading fraction of the trace that warms the cache without being counted.
    #[serde(default)]
    pub warmup_fraction: f64,
}

fn default_ways() -> u32 {
    DEFAULT_WAYS
}

fn default_tag_lookup() -> f64 {
    DEFAULT_TAG_LOOKUP_NS
}

impl CacheConfig {
    pub fn new(capacity_bytes: u64, block_bytes: u64, ways: u32) -> Self {
        Self {
            capacity_bytes,
            block_bytes,
            ways,
            tag_lookup_ns: DEFAULT_TAG_LOOKUP_NS,
            warmup_fraction: 0.0,
        }
    }

    /// Fully associative: a single set holding every block.
    pub fn fully_associative(capacity_bytes: u64, block_bytes: u64) -> Self {
        Self::new(capacity_bytes, block_bytes, (capacity_bytes / block_bytes) as u32)
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        let b = self.block_bytes;
        if !b.is_power_of_two() || !(BLOCK_BYTES..=PAGE_BYTES).contains(&b) {
            return Err(CacheError::InvalidBlockSize(b));
        }
        if self.ways == 0 {
            return Err(CacheError::ZeroWays);
        }
        let per_way = self.capacity_bytes / self.ways as u64;
        if b > per_way {
            return Err(CacheError::BlockExceedsWay { block: b, per_way });
        }
        let set_bytes = b * self.ways as u64;
        if self.capacity_bytes % set_bytes != 0 {
            return Err(CacheError::Indivisible {
                capacity: self.capacity_bytes,
                set_bytes,
            });
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(CacheError::InvalidWarmup(self.warmup_fraction));
        }
        Ok(())
    }

    pub fn sets(&self) -> u64 {
        self.capacity_bytes / (self.block_bytes * self.ways as u64)
    }

    pub fn sub_blocks(&self) -> u32 {
        (self.block_bytes / BLOCK_BYTES) as u32
    }
}

/// Cache capacity for a fraction of a footprint, rounded to the nearest whole
/// number of 4KB-per-way sets (at least one). The result is valid for every
/// block size up to 4KB, so sweeps over block size compare equal capacities.
pub fn capacity_for_fraction(footprint_bytes: u64, fraction: f64, ways: u32) -> u64 {
    let unit = PAGE_BYTES * ways as u64;
    let units = libm::round(footprint_bytes as f64 * fraction / unit as f64) as u64;
    units.max(1) * unit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheStats {
    pub block_bytes: u64,
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    pub fills: u64,
    /// `density_histogram[k]` counts sampled blocks with `k` touched sub-blocks.
    pub density_histogram: Vec<u64>,
    pub bytes_read_from_device: u64,
    pub bytes_written_to_device: u64,
}

impl CacheStats {
    fn new(block_bytes: u64) -> Self {
        Self {
            block_bytes,
            accesses: 0,
            hits: 0,
            misses: 0,
            writebacks: 0,
            fills: 0,
            density_histogram: vec![0; (block_bytes / BLOCK_BYTES) as usize + 1],
            bytes_read_from_device: 0,
            bytes_written_to_device: 0,
        }
    }

    pub fn miss_ratio(&self) -> f64 {
        if self.accesses == 0 {
            0.0
        } else {
            self.misses as f64 / self.accesses as f64
        }
    }

    pub fn density_samples(&self) -> u64 {
        self.density_histogram.iter().sum()
    }

    /// Sampled densities as (fraction, count) pairs, skipping empty buckets.
    pub fn densities(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        let subs = (self.density_histogram.len() - 1) as f64;
        self.density_histogram
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(k, &c)| (k as f64 / subs, c))
    }

    pub fn mean_density(&self) -> f64 {
        let n = self.density_samples();
        if n == 0 {
            return 0.0;
        }
        self.densities().map(|(d, c)| d * c as f64).sum::<f64>() / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BacksideKind {
    FillRead,
    Writeback,
}

/// Block-granular request from the cache to the backing device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacksideEvent {
    pub kind: BacksideKind,
    pub address: u64,
    pub size_bytes: u64,
    pub cause_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub block_address: u64,
    pub dirty: bool,
    pub touched_sub_blocks: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: bool,
    pub evicted: Option<Eviction>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    block: u64,
    dirty: bool,
    touched: u64,
    stamp: u64,
}

/// Incremental cache simulator. [`simulate_cache`] drives it over a trace.
#[derive(Debug)]
pub struct CacheSim {
    config: CacheConfig,
    sets: u64,
    lines: Vec<Line>,
    valid: Vec<u32>,
    lru: Vec<BTreeMap<u64, u32>>,
    index: HashMap<u64, usize>,
    clock: u64,
    recording: bool,
    stats: CacheStats,
    events: Vec<BacksideEvent>,
}

impl CacheSim {
    pub fn new(config: CacheConfig) -> Result<Self, CacheError> {
        config.validate()?;
        let sets = config.sets();
        let ways = config.ways as usize;
        Ok(Self {
            sets,
            lines: vec![Line::default(); sets as usize * ways],
            valid: vec![0; sets as usize],
            lru: vec![BTreeMap::new(); sets as usize],
            index: HashMap::new(),
            clock: 0,
            recording: true,
            stats: CacheStats::new(config.block_bytes),
            events: Vec::new(),
            config,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    /// While not recording, accesses update cache state only.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn stats(&self) -> &CacheStats {
        &self.stats
    }

    pub fn access(&mut self, r: &TraceRecord) -> AccessOutcome {
        let block_bytes = self.config.block_bytes;
        let block = r.address / block_bytes;
        let sub = (r.address % block_bytes) / BLOCK_BYTES;
        let set = (block % self.sets) as usize;
        let ways = self.config.ways as usize;
        self.clock += 1;
        let now = self.clock;
        if self.recording {
            self.stats.accesses += 1;
        }

        if let Some(&slot) = self.index.get(&block) {
            let line = &mut self.lines[slot];
            self.lru[set].remove(&line.stamp);
            line.stamp = now;
            line.touched |= 1 << sub;
            line.dirty |= r.op.is_write();
            self.lru[set].insert(now, (slot % ways) as u32);
            if self.recording {
                self.stats.hits += 1;
            }
            return AccessOutcome { hit: true, evicted: None };
        }

        let mut evicted = None;
        let way = if (self.valid[set] as usize) < ways {
            self.valid[set] += 1;
            self.valid[set] as usize - 1
        } else {
            let (_, way) = self.lru[set].pop_first().expect("full set has an LRU entry");
            let victim = self.lines[set * ways + way as usize];
            self.index.remove(&victim.block);
            let ev = Eviction {
                block_address: victim.block * block_bytes,
                dirty: victim.dirty,
                touched_sub_blocks: victim.touched.count_ones(),
            };
            if self.recording {
                self.stats.density_histogram[ev.touched_sub_blocks as usize] += 1;
                if ev.dirty {
                    self.stats.writebacks += 1;
                    self.stats.bytes_written_to_device += block_bytes;
                    self.events.push(BacksideEvent {
                        kind: BacksideKind::Writeback,
                        address: ev.block_address,
                        size_bytes: block_bytes,
                        cause_seq: r.seq,
                    });
                }
            }
            evicted = Some(ev);
            way as usize
        };

        let slot = set * ways + way;
        self.lines[slot] = Line {
            block,
            dirty: r.op.is_write(),
            touched: 1 << sub,
            stamp: now,
        };
        self.lru[set].insert(now, way as u32);
        self.index.insert(block, slot);

        if self.recording {
            self.stats.misses += 1;
            self.stats.fills += 1;
            self.stats.bytes_read_from_device += block_bytes;
            self.events.push(BacksideEvent {
                kind: BacksideKind::FillRead,
                address: block * block_bytes,
                size_bytes: block_bytes,
                cause_seq: r.seq,
            });
        }
        AccessOutcome { hit: false, evicted }
    }

    /// Samples the density of every resident block and returns the totals.
    pub fn finish(mut self) -> (CacheStats, Vec<BacksideEvent>) {
        let ways = self.config.ways as usize;
        for (set, &n) in self.valid.iter().enumerate() {
            for way in 0..n as usize {
                let touched = self.lines[set * ways + way].touched.count_ones();
                self.stats.density_histogram[touched as usize] += 1;
            }
        }
        (self.stats, self.events)
    }
}

/// Runs the cache over a trace, returning totals and the back-side request
/// stream in causal order (a dirty victim's writeback precedes its fill).
pub fn simulate_cache(trace: &Trace, config: &CacheConfig) -> Result<(CacheStats, Vec<BacksideEvent>), CacheError> {
    let mut sim = CacheSim::new(config.clone())?;
    let warmup = (trace.len() as f64 * config.warmup_fraction) as usize;
    sim.set_recording(warmup == 0);
    for (i, r) in trace.iter().enumerate() {
        if i == warmup {
            sim.set_recording(true);
        }
        sim.access(r);
    }
    Ok(sim.finish())
}

/// Mean region density per block size, with the cache sized at
/// `cache_fraction` of the trace footprint ([`capacity_for_fraction`]) and
/// default associativity.
pub fn region_density_profile(
    trace: &Trace,
    cache_fraction: f64,
    region_sizes: &[u64],
) -> Result<Vec<(u64, f64)>, CacheError> {
    let capacity = capacity_for_fraction(trace.footprint_bytes(), cache_fraction, DEFAULT_WAYS);
    region_sizes
        .iter()
        .map(|&region| {
            let cfg = CacheConfig::new(capacity, region, DEFAULT_WAYS);
            let (stats, _) = simulate_cache(trace, &cfg)?;
            Ok((region, stats.mean_density()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locality::lru_sim_oracle;
    use crate::trace::{generate_trace, Op, SyntheticTraceSpec};

    fn trace(ops: &[(Op, u64)]) -> Trace {
        Trace::new(
            ops.iter()
                .enumerate()
                .map(|(i, &(op, a))| TraceRecord::new(i as u64, op, a))
                .collect(),
        )
        .unwrap()
    }

    fn zipf(seed: u64, n: u64) -> Trace {
        generate_trace(&SyntheticTraceSpec {
            n_pages: 300,
            zipf_alpha: 0.9,
            read_fraction: 0.6,
            footprint_mean: 12.0,
            burst_contiguity: 0.7,
            n_records: n,
            seed,
            inter_arrival_ns: None,
        })
        .unwrap()
    }

    #[test]
    fn one_block_twice() {
        let t = trace(&[(Op::Read, 0), (Op::Read, 64)]);
        let (s, ev) = simulate_cache(&t, &CacheConfig::new(16384, 1024, 4)).unwrap();
        assert_eq!((s.misses, s.hits, s.fills, s.writebacks), (1, 1, 1, 0));
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, BacksideKind::FillRead);
    }

    #[test]
    fn full_page_writes_evict_dense_dirty_blocks() {
        // direct-mapped, 2 sets of 1KB; write 4 full blocks, the first two get evicted
        let ops: Vec<(Op, u64)> = (0..4 * 16).map(|i| (Op::Write, i * 64)).collect();
        let (s, ev) = simulate_cache(&trace(&ops), &CacheConfig::new(2048, 1024, 1)).unwrap();
        assert_eq!(s.writebacks, 2);
        assert_eq!(s.bytes_written_to_device, 2048);
        let wbs: Vec<_> = ev.iter().filter(|e| e.kind == BacksideKind::Writeback).collect();
        assert_eq!(wbs.len(), 2);
        assert!(wbs.iter().all(|e| e.size_bytes == 1024));
        assert_eq!(s.density_histogram[16], 4);
        assert_eq!(s.mean_density(), 1.0);
    }

    #[test]
    fn writeback_precedes_fill() {
        let t = trace(&[(Op::Write, 0), (Op::Read, 4096)]);
        let (_, ev) = simulate_cache(&t, &CacheConfig::new(4096, 4096, 1)).unwrap();
        let kinds: Vec<_> = ev.iter().map(|e| (e.kind, e.cause_seq)).collect();
        assert_eq!(
            kinds,
            vec![
                (BacksideKind::FillRead, 0),
                (BacksideKind::Writeback, 1),
                (BacksideKind::FillRead, 1)
            ]
        );
    }

    #[test]
    fn single_touch_density() {
        let ops: Vec<(Op, u64)> = (0..100).map(|i| (Op::Read, i * 2048)).collect();
        let (s, _) = simulate_cache(&trace(&ops), &CacheConfig::new(16384, 2048, 4)).unwrap();
        assert_eq!(s.density_samples(), 100);
        assert_eq!(s.density_histogram[1], 100);
        assert_eq!(s.mean_density(), 0.03125);
    }

    #[test]
    fn invariants_on_zipf() {
        let t = zipf(3, 20_000);
        for (cap, block, ways) in [(65536, 256, 4), (131072, 2048, 4), (32768, 4096, 8), (16384, 512, 1)] {
            let cfg = CacheConfig::new(cap, block, ways);
            let (s, ev) = simulate_cache(&t, &cfg).unwrap();
            assert_eq!(s.hits + s.misses, s.accesses);
            assert_eq!(s.fills, s.misses);
            assert_eq!(s.bytes_read_from_device, s.fills * block);
            assert_eq!(s.bytes_written_to_device, s.writebacks * block);
            assert_eq!(s.density_histogram[0], 0);
            let wb = ev.iter().filter(|e| e.kind == BacksideKind::Writeback).count() as u64;
            assert_eq!(wb, s.writebacks);
            assert!(ev.iter().all(|e| e.address % block == 0));
        }
    }

    #[test]
    fn fully_associative_matches_oracle() {
        let t = zipf(5, 10_000);
        for block in [256u64, 1024] {
            for blocks in [8u64, 32, 100] {
                let cap = blocks * block;
                let (s, _) = simulate_cache(&t, &CacheConfig::fully_associative(cap, block)).unwrap();
                assert_eq!(s.misses, lru_sim_oracle(&t, block, cap).unwrap());
            }
        }
    }

    #[test]
    fn dirty_iff_writeback_on_eviction() {
        let t = zipf(9, 5_000);
        let mut sim = CacheSim::new(CacheConfig::new(8192, 1024, 2)).unwrap();
        let mut dirty: hashbrown::HashSet<u64> = hashbrown::HashSet::new();
        for r in &t {
            let before = sim.events.len();
            let out = sim.access(r);
            if let Some(ev) = out.evicted {
                let was_dirty = dirty.remove(&ev.block_address);
                assert_eq!(ev.dirty, was_dirty);
                let wrote_back = sim.events[before..]
                    .iter()
                    .any(|e| e.kind == BacksideKind::Writeback && e.address == ev.block_address);
                assert_eq!(wrote_back, was_dirty);
            }
            if r.op == Op::Write {
                dirty.insert(r.address / 1024 * 1024);
            }
        }
    }

    #[test]
    fn warmup_skips_counting() {
        let t = zipf(1, 10_000);
        let mut cfg = CacheConfig::new(65536, 1024, 4);
        cfg.warmup_fraction = 0.25;
        let (s, _) = simulate_cache(&t, &cfg).unwrap();
        assert_eq!(s.accesses, 7_500);
        assert_eq!(s.hits + s.misses, 7_500);
    }

    #[test]
    fn config_errors() {
        assert_eq!(
            CacheConfig::new(4096, 2048, 4).validate(),
            Err(CacheError::BlockExceedsWay { block: 2048, per_way: 1024 })
        );
        assert_eq!(CacheConfig::new(4096, 1000, 1).validate(), Err(CacheError::InvalidBlockSize(1000)));
        assert_eq!(CacheConfig::new(8192, 8192, 1).validate(), Err(CacheError::InvalidBlockSize(8192)));
        assert!(matches!(
            CacheConfig::new(3 * 4096, 4096, 2).validate(),
            Err(CacheError::Indivisible { .. })
        ));
        assert_eq!(CacheConfig::new(4096, 64, 0).validate(), Err(CacheError::ZeroWays));
    }

    #[test]
    fn density_profile_endpoints() {
        // full touch: every visit covers a whole page
        let full = generate_trace(&SyntheticTraceSpec {
            n_pages: 256,
            zipf_alpha: 0.5,
            read_fraction: 1.0,
            footprint_mean: 64.0,
            burst_contiguity: 1.0,
            n_records: 64 * 2000,
            seed: 2,
            inter_arrival_ns: None,
        })
        .unwrap();
        for (_, d) in region_density_profile(&full, 0.03, &[256, 512, 1024, 2048, 4096]).unwrap() {
            assert_eq!(d, 1.0);
        }

        // one 64B touch per 4KB page
        let ops: Vec<(Op, u64)> = (0..3000).map(|i| (Op::Read, (i % 1000) * 4096)).collect();
        let single = trace(&ops);
        for (region, d) in region_density_profile(&single, 0.03, &[256, 512, 1024, 2048, 4096]).unwrap() {
            assert_eq!(d, 64.0 / region as f64);
        }
    }
}
