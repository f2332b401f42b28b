//! Models for a two-tier memory hierarchy built from a page-based DRAM cache in
//! front of storage-class memory (SCM).
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure function
//! of its inputs: trace generation is seeded, simulations are deterministic, and
//! no module touches the filesystem. File formats, the CLI and parallel sweeps
//! live in the `scmx` crate.
//!
//! Module map:
//!
//! - [`trace`]: 64B-granularity trace records and the synthetic Zipf generator.
//! - [`locality`]: fully-associative LRU miss-ratio curves via stack distance.
//! - [`cache`]: set-associative page cache with region-density accounting.
//! - [`memdev`]: event-driven timing model of one DRAM/SCM channel.
//! - [`amat`]: closed-form amortized access time vs. transfer size.
//! - [`cost`]: relative cost and performance/cost arithmetic.
//! - [`zipf`]: analytical hot-fraction of Zipf popularity.
//! - [`hierarchy`]: cache + device composition and the performance proxy.
//! - [`explorer`]: (row buffer, read latency, write latency) sweeps and frontiers.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod amat;
pub mod cache;
pub mod cost;
pub mod explorer;
pub mod hierarchy;
pub mod locality;
pub mod memdev;
pub mod trace;
pub mod zipf;

/// Trace request granularity (one LLC block).
pub const BLOCK_BYTES: u64 = 64;

/// OS page size used for popularity modeling and footprint accounting.
pub const PAGE_BYTES: u64 = 4096;

pub use amat::{amat_curve, amat_unloaded, AmatQuery};
pub use cache::{simulate_cache, BacksideEvent, BacksideKind, CacheConfig, CacheStats};
pub use cost::{hierarchy_cost, perf_per_cost, CostTable, HierarchySpec};
pub use explorer::{frontier, sweep, DesignPoint, FeasibilityReport};
pub use hierarchy::{simulate_hierarchy, HierarchyOptions, HierarchyStats};

pub use locality::{lru_sim_oracle, miss_ratio_curve, MissCurve};
pub use memdev::{service_latency, simulate_device, DeviceGeometry, DeviceStats, TimingParams};
pub use trace::{generate_trace, Op, SyntheticTraceSpec, Trace, TraceRecord};
pub use zipf::{generalized_harmonic, hot_fraction, HotFractionQuery};
