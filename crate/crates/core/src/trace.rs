//! Trace records and the synthetic trace generator.
//!
//! A trace is a sequence of 64B LLC-miss events. The generator stands in for
//! captured workload traces: pages are drawn from a Zipf popularity law and each
//! page visit touches a configurable number of 64B sub-blocks, optionally in
//! contiguous runs.

use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{BLOCK_BYTES, PAGE_BYTES};

const SUB_BLOCKS_PER_PAGE: u32 = (PAGE_BYTES / BLOCK_BYTES) as u32;

/// Above this page count the generator switches from a cumulative table to
/// rejection-inversion sampling.
pub const ZIPF_TABLE_LIMIT: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("record {seq}: address {address:#x} is not 64B aligned")]
    Misaligned { seq: u64, address: u64 },
    #[error("record {seq}: sequence number does not increase (previous {prev})")]
    NonIncreasingSeq { seq: u64, prev: u64 },
    #[error("record {seq}: arrival offset decreases")]
    DecreasingArrival { seq: u64 },
    #[error("invalid trace spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Read,
    Write,
}

impl Op {
    pub fn is_write(self) -> bool {
        matches!(self, Op::Write)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    pub op: Op,
    pub address: u64,
    pub arrival_offset_ns: Option<u64>,
}

impl TraceRecord {
    pub fn new(seq: u64, op: Op, address: u64) -> Self {
        Self {
            seq,
            op,
            address,
            arrival_offset_ns: None,
        }
    }
}

/// A validated, immutable trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    /// Validates alignment, strictly increasing `seq`, and non-decreasing
    /// arrival offsets.
    pub fn new(records: Vec<TraceRecord>) -> Result<Self, TraceError> {
        let mut prev: Option<&TraceRecord> = None;
        for r in &records {
            validate_next(prev, r)?;
            prev = Some(r);
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, TraceRecord> {
        self.records.iter()
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    /// Number of distinct 4KB pages touched.
    pub fn footprint_pages(&self) -> u64 {
        let pages: HashSet<u64> = self.records.iter().map(|r| r.address / PAGE_BYTES).collect();
        pages.len() as u64
    }

    /// Touched footprint in bytes, at page granularity. This is the "dataset
    /// size" that cache fractions are taken against.
    pub fn footprint_bytes(&self) -> u64 {
        self.footprint_pages() * PAGE_BYTES
    }

    pub fn read_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let reads = self.records.iter().filter(|r| r.op == Op::Read).count();
        reads as f64 / self.records.len() as f64
    }
}

impl<'a> IntoIterator for &'a Trace {
    type Item = &'a TraceRecord;
    type IntoIter = core::slice::Iter<'a, TraceRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Checks one record against its predecessor. Shared by [`Trace::new`] and the
/// streaming readers in the IO crate.
pub fn validate_next(prev: Option<&TraceRecord>, r: &TraceRecord) -> Result<(), TraceError> {
    if r.address % BLOCK_BYTES != 0 {
        return Err(TraceError::Misaligned {
            seq: r.seq,
            address: r.address,
        });
    }
    if let Some(p) = prev {
        if r.seq <= p.seq {
            return Err(TraceError::NonIncreasingSeq {
                seq: r.seq,
                prev: p.seq,
            });
        }
        if let (Some(a), Some(b)) = (p.arrival_offset_ns, r.arrival_offset_ns) {
            if b < a {
                return Err(TraceError::DecreasingArrival { seq: r.seq });
            }
        }
    }
    Ok(())
}

/// Parameters of a synthetic trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTraceSpec {
    /// Distinct 4KB pages in the dataset.
    pub n_pages: u64,
    /// Zipf skew of page popularity; 0 is uniform.
    pub zipf_alpha: f64,
    pub read_fraction: f64,
    /// Mean distinct 64B sub-blocks touched per page visit, in [1, 64].
    pub footprint_mean: f64,
    /// Probability that the next touched sub-block is adjacent to the previous one.
    pub burst_contiguity: f64,
    pub n_records: u64,
    pub seed: u64,
    /// Mean spacing between records; when set, records carry exponential
    /// inter-arrival offsets.
    #[serde(default)]
    pub inter_arrival_ns: Option<f64>,
}

impl SyntheticTraceSpec {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |msg: &str| Err(TraceError::InvalidSpec(msg.into()));
        if self.n_pages == 0 {
            return bad("n_pages must be at least 1");
        }
        if !(self.zipf_alpha >= 0.0) || !self.zipf_alpha.is_finite() {
            return bad("zipf_alpha must be a finite value >= 0");
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return bad("read_fraction must be in [0, 1]");
        }
        if !(1.0..=SUB_BLOCKS_PER_PAGE as f64).contains(&self.footprint_mean) {
            return bad("footprint_mean must be in [1, 64]");
        }
        if !(0.0..=1.0).contains(&self.burst_contiguity) {
            return bad("burst_contiguity must be in [0, 1]");
        }
        if let Some(ia) = self.inter_arrival_ns {
            if !(ia > 0.0) || !ia.is_finite() {
                return bad("inter_arrival_ns must be positive");
            }
        }
        if self.n_pages.checked_mul(PAGE_BYTES).is_none() {
            return bad("n_pages overflows the address space");
        }
        Ok(())
    }
}

/// Draws page ranks (0-based) with P(rank k) proportional to (k+1)^-alpha.
enum PageSampler {
    Table(Vec<f64>),
    Rejection(rand_distr::Zipf<f64>),
}

impl PageSampler {
    fn new(n_pages: u64, alpha: f64) -> Self {
        if n_pages <= ZIPF_TABLE_LIMIT {
            let mut cdf = Vec::with_capacity(n_pages as usize);
            let mut acc = 0.0;
            for i in 1..=n_pages {
                acc += libm::pow(i as f64, -alpha);
                cdf.push(acc);
            }
            PageSampler::Table(cdf)
        } else {
            // n_pages > 0 and alpha >= 0 are checked by the spec.
            PageSampler::Rejection(rand_distr::Zipf::new(n_pages as f64, alpha).expect("valid zipf"))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            PageSampler::Table(cdf) => {
                let total = *cdf.last().expect("non-empty table");
                let u = rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u);
                idx.min(cdf.len() - 1) as u64
            }
            PageSampler::Rejection(z) => z.sample(rng) as u64 - 1,
        }
    }
}

/// Generates a deterministic synthetic trace.
///
/// Each iteration picks a page by Zipf rank (rank `k` is page `k`), draws the
/// visit size as `1 + Binomial(63, (footprint_mean - 1) / 63)`, starts at a
/// sub-block where a contiguous run of that size fits, then extends the run
/// with probability `burst_contiguity` per step or jumps to a random untouched
/// sub-block. The final visit is truncated at `n_records`.
pub fn generate_trace(spec: &SyntheticTraceSpec) -> Result<Trace, TraceError> {
    spec.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pages = PageSampler::new(spec.n_pages, spec.zipf_alpha);
    let extra = Binomial::new(
        (SUB_BLOCKS_PER_PAGE - 1) as u64,
        (spec.footprint_mean - 1.0) / (SUB_BLOCKS_PER_PAGE - 1) as f64,
    )
    .map_err(|_| TraceError::InvalidSpec("footprint_mean".into()))?;
    let gap = spec
        .inter_arrival_ns
        .map(|mean| Exp::new(1.0 / mean).expect("positive rate"));

    let n = spec.n_records as usize;
    let mut records = Vec::with_capacity(n);
    let mut clock = 0.0f64;
    let mut visit: Vec<u32> = Vec::with_capacity(SUB_BLOCKS_PER_PAGE as usize);

    while records.len() < n {
        let page = pages.sample(&mut rng);
        let count = 1 + extra.sample(&mut rng) as u32;
        visit_sub_blocks(&mut rng, count, spec.burst_contiguity, &mut visit);

        for &sub in &visit {
            if records.len() == n {
                break;
            }
            let op = if rng.random::<f64>() < spec.read_fraction {
                Op::Read
            } else {
                Op::Write
            };
            let arrival_offset_ns = gap.as_ref().map(|d| {
                if !records.is_empty() {
                    clock += d.sample(&mut rng);
                }
                clock as u64
            });
            records.push(TraceRecord {
                seq: records.len() as u64,
                op,
                address: page * PAGE_BYTES + sub as u64 * BLOCK_BYTES,
                arrival_offset_ns,
            });
        }
    }

    Ok(Trace { records })
}

fn visit_sub_blocks<R: Rng>(rng: &mut R, count: u32, contiguity: f64, out: &mut Vec<u32>) {
    out.clear();
    let mut touched = 0u64;
    let mut cur = rng.random_range(0..=SUB_BLOCKS_PER_PAGE - count);
    out.push(cur);
    touched |= 1 << cur;

    while (out.len() as u32) < count {
        let adjacent = cur + 1;
        let next = if adjacent < SUB_BLOCKS_PER_PAGE
            && touched & (1 << adjacent) == 0
            && rng.random::<f64>() < contiguity
        {
            adjacent
        } else {
            // uniform over the untouched sub-blocks
            let free = SUB_BLOCKS_PER_PAGE - touched.count_ones();
            let mut pick = rng.random_range(0..free);
            let mut idx = 0;
            loop {
                if touched & (1 << idx) == 0 {
                    if pick == 0 {
                        break idx;
                    }
                    pick -= 1;
                }
                idx += 1;
            }
        };
        out.push(next);
        touched |= 1 << next;
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticTraceSpec {
        SyntheticTraceSpec {
            n_pages: 1000,
            zipf_alpha: 0.9,
            read_fraction: 0.7,
            footprint_mean: 16.0,
            burst_contiguity: 0.8,
            n_records: 10_000,
            seed: 7,
            inter_arrival_ns: None,
        }
    }

    #[test]
    fn single_page_full_touch_is_sequential() {
        let s = SyntheticTraceSpec {
            n_pages: 1,
            footprint_mean: 64.0,
            burst_contiguity: 1.0,
            n_records: 64,
            read_fraction: 1.0,
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        let addrs: Vec<u64> = t.iter().map(|r| r.address).collect();
        let expected: Vec<u64> = (0..64).map(|i| i * 64).collect();
        assert_eq!(addrs, expected);
        assert!(t.iter().all(|r| r.op == Op::Read));
    }

    #[test]
    fn full_touch_visits_are_runs_of_64() {
        let s = SyntheticTraceSpec {
            footprint_mean: 64.0,
            burst_contiguity: 1.0,
            n_records: 64 * 50,
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        for chunk in t.records().chunks(64) {
            let page = chunk[0].address / PAGE_BYTES;
            for (i, r) in chunk.iter().enumerate() {
                assert_eq!(r.address, page * PAGE_BYTES + i as u64 * 64);
            }
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let a = generate_trace(&spec()).unwrap();
        let b = generate_trace(&spec()).unwrap();
        assert_eq!(a, b);
        let c = generate_trace(&SyntheticTraceSpec { seed: 8, ..spec() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn addresses_stay_in_range() {
        let t = generate_trace(&spec()).unwrap();
        assert_eq!(t.len(), 10_000);
        assert!(t.iter().all(|r| r.address < 1000 * PAGE_BYTES && r.address % 64 == 0));
    }

    #[test]
    fn read_fraction_within_two_points() {
        let s = SyntheticTraceSpec {
            n_records: 100_000,
            read_fraction: 0.63,
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        assert!((t.read_fraction() - 0.63).abs() < 0.02, "{}", t.read_fraction());
    }

    #[test]
    fn uniform_when_alpha_zero() {
        let n_pages = 50u64;
        let s = SyntheticTraceSpec {
            n_pages,
            zipf_alpha: 0.0,
            footprint_mean: 1.0,
            n_records: 100_000,
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        let mut counts = vec![0u64; n_pages as usize];
        for r in &t {
            counts[(r.address / PAGE_BYTES) as usize] += 1;
        }
        let expected = 100_000.0 / n_pages as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 49 dof; the 0.999 quantile is about 85.4
        assert!(chi2 < 85.4, "chi2 = {chi2}");
    }

    #[test]
    fn page_popularity_follows_zipf() {
        let n_pages = 100u64;
        let alpha = 1.0;
        let s = SyntheticTraceSpec {
            n_pages,
            zipf_alpha: alpha,
            footprint_mean: 1.0,
            n_records: 200_000,
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        let mut counts = vec![0u64; n_pages as usize];
        for r in &t {
            counts[(r.address / PAGE_BYTES) as usize] += 1;
        }
        let norm: f64 = (1..=n_pages).map(|i| (i as f64).powf(-alpha)).sum();
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let e = 200_000.0 * ((k + 1) as f64).powf(-alpha) / norm;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 99 dof; the 0.999 quantile is about 148.2
        assert!(chi2 < 148.2, "chi2 = {chi2}");
    }

    #[test]
    fn rejection_sampler_covers_large_page_counts() {
        let s = SyntheticTraceSpec {
            n_pages: ZIPF_TABLE_LIMIT + 1,
            zipf_alpha: 0.9,
            n_records: 20_000,
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        assert!(t.iter().all(|r| r.address < s.n_pages * PAGE_BYTES));
        // rank 0 must dominate under skew
        let first = t.iter().filter(|r| r.address / PAGE_BYTES == 0).count();
        assert!(first > 100);
    }

    #[test]
    fn arrival_offsets_non_decreasing() {
        let s = SyntheticTraceSpec {
            inter_arrival_ns: Some(25.0),
            ..spec()
        };
        let t = generate_trace(&s).unwrap();
        let offs: Vec<u64> = t.iter().map(|r| r.arrival_offset_ns.unwrap()).collect();
        assert!(offs.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(offs[0], 0);
        let mean = *offs.last().unwrap() as f64 / (offs.len() - 1) as f64;
        assert!((mean - 25.0).abs() < 2.0, "{mean}");
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            SyntheticTraceSpec { footprint_mean: 0.5, ..spec() },
            SyntheticTraceSpec { footprint_mean: 65.0, ..spec() },
            SyntheticTraceSpec { read_fraction: 1.5, ..spec() },
            SyntheticTraceSpec { read_fraction: -0.1, ..spec() },
            SyntheticTraceSpec { n_pages: 0, ..spec() },
        ] {
            assert!(matches!(generate_trace(&bad), Err(TraceError::InvalidSpec(_))));
        }
    }

    #[test]
    fn trace_validation() {
        let ok = vec![TraceRecord::new(0, Op::Read, 0x1000), TraceRecord::new(1, Op::Write, 0x1040)];
        assert!(Trace::new(ok).is_ok());
        let misaligned = vec![TraceRecord::new(2, Op::Read, 0x1001)];
        assert_eq!(
            Trace::new(misaligned),
            Err(TraceError::Misaligned { seq: 2, address: 0x1001 })
        );
        let dup = vec![TraceRecord::new(3, Op::Read, 0), TraceRecord::new(3, Op::Read, 64)];
        assert!(matches!(Trace::new(dup), Err(TraceError::NonIncreasingSeq { .. })));
    }
}
