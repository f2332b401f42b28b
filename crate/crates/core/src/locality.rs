//! Fully-associative LRU miss-ratio curves.
//!
//! [`miss_ratio_curve`] computes the miss ratio at every capacity in one pass
//! using LRU stack distances (Mattson et al.): an access hits in a cache of `c`
//! blocks iff fewer than `c` distinct blocks were touched since the previous
//! access to the same block. Distances come from a Fenwick tree over access
//! timestamps, where a slot is set iff it holds the most recent access of its
//! block, so each query is O(log N).
//!
//! [`lru_sim_oracle`] simulates one LRU cache directly and is the cross-check.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::Trace;
use crate::BLOCK_BYTES;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocalityError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("block size {0} must be a power of two in 64..=4096")]
    InvalidBlockSize(u64),
    #[error("capacity {capacity} is smaller than the block size {block}")]
    CapacityBelowBlock { capacity: u64, block: u64 },
    #[error("capacities must be sorted ascending")]
    UnsortedCapacities,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissPoint {
    pub capacity_bytes: u64,
    pub misses: u64,
    pub miss_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissCurve {
    pub block_bytes: u64,
    pub points: Vec<MissPoint>,
    pub accesses: u64,
    pub distinct_blocks: u64,
}

impl MissCurve {
    /// Compulsory-miss floor: every distinct block misses once.
    pub fn compulsory_ratio(&self) -> f64 {
        self.distinct_blocks as f64 / self.accesses as f64
    }
}

/// Capacity grid as fractions of the trace footprint, spanning 0.1% to 12%.
pub const DEFAULT_CAPACITY_FRACTIONS: [f64; 8] = [0.001, 0.0025, 0.005, 0.01, 0.02, 0.04, 0.08, 0.12];

/// Converts footprint fractions into block-aligned capacities (at least one
/// block each), sorted and deduplicated.
pub fn capacities_for_fractions(footprint_bytes: u64, block_bytes: u64, fractions: &[f64]) -> Vec<u64> {
    let mut caps: Vec<u64> = fractions
        .iter()
        .map(|f| {
            let raw = (footprint_bytes as f64 * f) as u64;
            (raw / block_bytes).max(1) * block_bytes
        })
        .collect();
    caps.sort_unstable();
    caps.dedup();
    caps
}

fn check_block(block_bytes: u64) -> Result<(), LocalityError> {
    if block_bytes.is_power_of_two() && (BLOCK_BYTES..=4096).contains(&block_bytes) {
        Ok(())
    } else {
        Err(LocalityError::InvalidBlockSize(block_bytes))
    }
}

fn check_capacity(capacity: u64, block_bytes: u64) -> Result<(), LocalityError> {
    if capacity < block_bytes {
        Err(LocalityError::CapacityBelowBlock {
            capacity,
            block: block_bytes,
        })
    } else {
        Ok(())
    }
}

struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, idx: usize, delta: i32) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] = (self.tree[i] as i32 + delta) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `[0, idx)`.
    fn prefix(&self, idx: usize) -> u64 {
        let mut i = idx;
        let mut s = 0u64;
        while i > 0 {
            s += self.tree[i] as u64;
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// LRU stack distance of every access; `None` marks a first touch.
pub fn stack_distances(trace: &Trace, block_bytes: u64) -> Vec<Option<u64>> {
    let n = trace.len();
    let mut marks = Fenwick::new(n);
    let mut last: HashMap<u64, usize> = HashMap::new();
    let mut out = Vec::with_capacity(n);

    for (t, r) in trace.iter().enumerate() {
        let block = r.address / block_bytes;
        let d = match last.insert(block, t) {
            Some(p) => {
                let d = marks.prefix(t) - marks.prefix(p + 1);
                marks.add(p, -1);
                Some(d)
            }
            None => None,
        };
        marks.add(t, 1);
        out.push(d);
    }
    out
}

/// Miss ratio of a fully-associative LRU cache at each capacity, in one pass.
/// Reads and writes are treated alike (write-allocate).
pub fn miss_ratio_curve(trace: &Trace, block_bytes: u64, capacities: &[u64]) -> Result<MissCurve, LocalityError> {
    if trace.is_empty() {
        return Err(LocalityError::EmptyTrace);
    }
    check_block(block_bytes)?;
    for &c in capacities {
        check_capacity(c, block_bytes)?;
    }
    if capacities.windows(2).any(|w| w[0] > w[1]) {
        return Err(LocalityError::UnsortedCapacities);
    }

    let distances = stack_distances(trace, block_bytes);
    let mut cold = 0u64;
    // hist[d] = reuses at distance d
    let mut hist: Vec<u64> = Vec::new();
    for d in distances {
        match d {
            None => cold += 1,
            Some(d) => {
                let d = d as usize;
                if d >= hist.len() {
                    hist.resize(d + 1, 0);
                }
                hist[d] += 1;
            }
        }
    }

    // suffix[i] = reuses with distance >= i
    let mut suffix = vec![0u64; hist.len() + 1];
    for i in (0..hist.len()).rev() {
        suffix[i] = suffix[i + 1] + hist[i];
    }

    let accesses = trace.len() as u64;
    let points = capacities
        .iter()
        .map(|&cap| {
            let blocks = (cap / block_bytes) as usize;
            let capacity_misses = suffix.get(blocks).copied().unwrap_or(0);
            let misses = cold + capacity_misses;
            MissPoint {
                capacity_bytes: cap,
                misses,
                miss_ratio: misses as f64 / accesses as f64,
            }
        })
        .collect();

    Ok(MissCurve {
        block_bytes,
        points,
        accesses,
        distinct_blocks: cold,
    })
}

/// Direct simulation of one fully-associative LRU cache; returns the miss count.
pub fn lru_sim_oracle(trace: &Trace, block_bytes: u64, capacity_bytes: u64) -> Result<u64, LocalityError> {
    if trace.is_empty() {
        return Err(LocalityError::EmptyTrace);
    }
    check_block(block_bytes)?;
    check_capacity(capacity_bytes, block_bytes)?;

    let slots = (capacity_bytes / block_bytes) as usize;
    let mut last_use: HashMap<u64, u64> = HashMap::new();
    let mut by_age: BTreeMap<u64, u64> = BTreeMap::new();
    let mut misses = 0;

    for (now, r) in trace.iter().enumerate() {
        let now = now as u64;
        let block = r.address / block_bytes;
        match last_use.get_mut(&block) {
            Some(t) => {
                by_age.remove(t);
                *t = now;
            }
            None => {
                misses += 1;
                if last_use.len() == slots {
                    let (_, victim) = by_age.pop_first().expect("full cache has a victim");
                    last_use.remove(&victim);
                }
                last_use.insert(block, now);
            }
        }
        by_age.insert(now, block);
    }
    Ok(misses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_trace, Op, SyntheticTraceSpec, TraceRecord};

    fn trace_of(blocks: &[u64], block_bytes: u64) -> Trace {
        Trace::new(
            blocks
                .iter()
                .enumerate()
                .map(|(i, b)| TraceRecord::new(i as u64, Op::Read, b * block_bytes))
                .collect(),
        )
        .unwrap()
    }

    fn cyclic(m: u64, rounds: u64) -> Trace {
        let blocks: Vec<u64> = (0..rounds).flat_map(|_| 0..m).collect();
        trace_of(&blocks, 64)
    }

    #[test]
    fn cyclic_fits_only_compulsory() {
        let t = cyclic(10, 5);
        let c = miss_ratio_curve(&t, 64, &[640, 1280]).unwrap();
        for p in &c.points {
            assert_eq!(p.misses, 10);
            assert_eq!(p.miss_ratio, 10.0 / 50.0);
        }
    }

    #[test]
    fn cyclic_one_short_always_misses() {
        let t = cyclic(10, 5);
        let c = miss_ratio_curve(&t, 64, &[9 * 64]).unwrap();
        assert_eq!(c.points[0].miss_ratio, 1.0);
        assert_eq!(lru_sim_oracle(&t, 64, 9 * 64).unwrap(), 50);
    }

    #[test]
    fn oracle_small_cases() {
        assert_eq!(lru_sim_oracle(&trace_of(&[3, 3], 64), 64, 64).unwrap(), 1);
        assert_eq!(lru_sim_oracle(&trace_of(&[1, 2, 1, 2, 1, 2], 64), 64, 128).unwrap(), 2);
    }

    #[test]
    fn distances_hand_checked() {
        let t = trace_of(&[1, 2, 3, 1, 1, 2], 64);
        assert_eq!(
            stack_distances(&t, 64),
            vec![None, None, None, Some(2), Some(0), Some(2)]
        );
    }

    #[test]
    fn matches_oracle_on_zipf_trace() {
        let spec = SyntheticTraceSpec {
            n_pages: 400,
            zipf_alpha: 0.8,
            read_fraction: 0.7,
            footprint_mean: 8.0,
            burst_contiguity: 0.5,
            n_records: 20_000,
            seed: 11,
            inter_arrival_ns: None,
        };
        let t = generate_trace(&spec).unwrap();
        for block in [64, 256, 1024, 4096] {
            let caps = capacities_for_fractions(t.footprint_bytes(), block, &DEFAULT_CAPACITY_FRACTIONS);
            let curve = miss_ratio_curve(&t, block, &caps).unwrap();
            for p in &curve.points {
                assert_eq!(p.misses, lru_sim_oracle(&t, block, p.capacity_bytes).unwrap());
            }
        }
    }

    #[test]
    fn errors() {
        let t = cyclic(4, 2);
        assert_eq!(
            miss_ratio_curve(&Trace::default(), 64, &[64]),
            Err(LocalityError::EmptyTrace)
        );
        assert_eq!(
            miss_ratio_curve(&t, 64, &[32]),
            Err(LocalityError::CapacityBelowBlock { capacity: 32, block: 64 })
        );
        assert_eq!(miss_ratio_curve(&t, 96, &[960]), Err(LocalityError::InvalidBlockSize(96)));
        assert_eq!(miss_ratio_curve(&t, 64, &[128, 64]), Err(LocalityError::UnsortedCapacities));
        assert!(lru_sim_oracle(&t, 128, 64).is_err());
    }

    #[test]
    fn fraction_grid_is_block_aligned() {
        let caps = capacities_for_fractions(1 << 20, 4096, &DEFAULT_CAPACITY_FRACTIONS);
        assert!(caps.iter().all(|c| c % 4096 == 0 && *c >= 4096));
        assert!(caps.windows(2).all(|w| w[0] < w[1]));
    }
}
