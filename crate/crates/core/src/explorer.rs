//! Design-space sweeps over (row buffer, read latency, write latency).
//!
//! Every design point is an SCM channel whose cache block equals its row
//! buffer. Each point is compared per workload against a fixed baseline, DRAM
//! behind a 1KB-block cache of the same size, and is feasible when its
//! performance ratio is at least `1 - margin` on every workload.
//!
//! The cache pass depends only on (workload, block size), so a sweep runs it
//! once per pair and replays the back-side stream against each timing.
//! Independent runs go through an [`Executor`] so callers can parallelize
//! them; results are always assembled in grid order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{capacity_for_fraction, CacheConfig, DEFAULT_TAG_LOOKUP_NS, DEFAULT_WAYS};
use crate::cost::{cost_breakdown, perf_per_cost, CostError, CostTable, HierarchySpec, PLANAR_DRAM};
use crate::hierarchy::{
    cache_stage, device_stage, relative_perf, simulate_flat, CacheStage, HierarchyError, HierarchyOptions,
    HierarchyStats,
};
use crate::memdev::{DeviceGeometry, TimingParams};
use crate::trace::{SyntheticTraceSpec, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorerError {
    #[error("design grid is empty")]
    EmptyGrid,
    #[error("no workloads given")]
    EmptyWorkloads,
    #[error("invalid design point {0:?}")]
    InvalidPoint(DesignPoint),
    #[error("target margin {0} must be in [0, 1)")]
    BadMargin(f64),
    #[error("cache fraction {0} must be in (0, 1]")]
    BadFraction(f64),
    #[error("workload {workload}: {source}")]
    Run {
        workload: String,
        #[source]
        source: HierarchyError,
    },
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Lowest latencies a design point may take: DRAM activation and restoration.
pub const MIN_T_READ_NS: f64 = 14.0;
pub const MIN_T_WRITE_NS: f64 = 9.0;

pub const DEFAULT_ROW_BUFFERS: [u64; 4] = [512, 1024, 2048, 4096];
pub const DEFAULT_T_READ_NS: [f64; 5] = [60.0, 125.0, 250.0, 500.0, 1000.0];
pub const DEFAULT_T_WRITE_NS: [f64; 6] = [150.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0];

/// Mean region density (at the doubled block size) above which doubling the
/// row buffer is expected to keep every feasible latency pair feasible.
pub const WIDENING_DENSITY_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignPoint {
    pub row_buffer_bytes: u64,
    pub t_read_ns: f64,
    pub t_write_ns: f64,
}

impl DesignPoint {
    pub fn new(row_buffer_bytes: u64, t_read_ns: f64, t_write_ns: f64) -> Self {
        Self {
            row_buffer_bytes,
            t_read_ns,
            t_write_ns,
        }
    }

    pub fn validate(&self) -> Result<(), ExplorerError> {
        let rb_ok = self.row_buffer_bytes.is_power_of_two() && (512..=4096).contains(&self.row_buffer_bytes);
        if !rb_ok || !(self.t_read_ns >= MIN_T_READ_NS) || !(self.t_write_ns >= MIN_T_WRITE_NS) {
            return Err(ExplorerError::InvalidPoint(*self));
        }
        Ok(())
    }

    pub fn timing(&self) -> TimingParams {
        TimingParams::scm(self.t_read_ns, self.t_write_ns)
    }

    /// True if `self` is no slower than `other` on both latencies at the same
    /// row buffer.
    pub fn dominates(&self, other: &DesignPoint) -> bool {
        self.row_buffer_bytes == other.row_buffer_bytes
            && self.t_read_ns <= other.t_read_ns
            && self.t_write_ns <= other.t_write_ns
    }
}

/// Cartesian product in (row buffer, read, write) order.
pub fn grid(row_buffers: &[u64], t_reads: &[f64], t_writes: &[f64]) -> Vec<DesignPoint> {
    let mut out = Vec::with_capacity(row_buffers.len() * t_reads.len() * t_writes.len());
    for &rb in row_buffers {
        for &r in t_reads {
            for &w in t_writes {
                out.push(DesignPoint::new(rb, r, w));
            }
        }
    }
    out
}

pub fn default_grid() -> Vec<DesignPoint> {
    grid(&DEFAULT_ROW_BUFFERS, &DEFAULT_T_READ_NS, &DEFAULT_T_WRITE_NS)
}

/// Runs independent jobs. Implementations may run them concurrently but must
/// return results in input order.
pub trait Executor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub trace: Trace,
}

impl Workload {
    pub fn new(name: &str, trace: Trace) -> Self {
        Self {
            name: name.to_string(),
            trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Cache capacity over the workload's touched footprint.
    pub cache_fraction: f64,
    pub target_margin: f64,
    pub ways: u32,
    pub tag_lookup_ns: f64,
    pub options: HierarchyOptions,
    pub baseline_block_bytes: u64,
    pub baseline_row_buffer_bytes: u64,
    pub ranks: u32,
    pub banks_per_rank: u32,
    /// Leading fraction of every trace that only warms the cache.
    pub warmup_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cache_fraction: 1.0 / 32.0,
            target_margin: 0.10,
            ways: DEFAULT_WAYS,
            tag_lookup_ns: DEFAULT_TAG_LOOKUP_NS,
            options: HierarchyOptions::default(),
            baseline_block_bytes: 1024,
            baseline_row_buffer_bytes: 8192,
            ranks: 2,
            banks_per_rank: 8,
            warmup_fraction: 0.2,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExplorerError> {
        if !(0.0..1.0).contains(&self.target_margin) {
            return Err(ExplorerError::BadMargin(self.target_margin));
        }
        check_fraction(self.cache_fraction)
    }

    fn cache_config(&self, trace: &Trace, block_bytes: u64, fraction: f64) -> CacheConfig {
        let capacity = capacity_for_fraction(trace.footprint_bytes(), fraction, self.ways);
        CacheConfig {
            tag_lookup_ns: self.tag_lookup_ns,
            warmup_fraction: self.warmup_fraction,
            ..CacheConfig::new(capacity, block_bytes, self.ways)
        }
    }

    fn geometry(&self, row_buffer_bytes: u64) -> DeviceGeometry {
        DeviceGeometry {
            ranks: self.ranks,
            banks_per_rank: self.banks_per_rank,
            ..DeviceGeometry::dual_rank(row_buffer_bytes)
        }
    }

    pub fn baseline_description(&self) -> String {
        format!(
            "DDR4 DRAM ({}B rows) behind a {}B-block cache at {:.4} of footprint",
            self.baseline_row_buffer_bytes, self.baseline_block_bytes, self.cache_fraction
        )
    }
}

fn check_fraction(f: f64) -> Result<(), ExplorerError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(ExplorerError::BadFraction(f))
    }
}

fn run_err(workload: &Workload) -> impl FnOnce(HierarchyError) -> ExplorerError + '_ {
    move |source| ExplorerError::Run {
        workload: workload.name.clone(),
        source,
    }
}

/// The baseline run for one workload.
pub fn baseline_run(workload: &Workload, cfg: &SweepConfig) -> Result<HierarchyStats, ExplorerError> {
    let cache = cfg.cache_config(&workload.trace, cfg.baseline_block_bytes, cfg.cache_fraction);
    let stage = cache_stage(&workload.trace, &cache, &cfg.options).map_err(run_err(workload))?;
    device_stage(&stage, &cfg.geometry(cfg.baseline_row_buffer_bytes), &TimingParams::ddr4_dram())
        .map_err(run_err(workload))
}

/// One design point on one workload at the given cache fraction.
pub fn point_run(
    workload: &Workload,
    point: &DesignPoint,
    cache_fraction: f64,
    cfg: &SweepConfig,
) -> Result<HierarchyStats, ExplorerError> {
    point.validate()?;
    let cache = cfg.cache_config(&workload.trace, point.row_buffer_bytes, cache_fraction);
    let stage = cache_stage(&workload.trace, &cache, &cfg.options).map_err(run_err(workload))?;
    device_stage(&stage, &cfg.geometry(point.row_buffer_bytes), &point.timing()).map_err(run_err(workload))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: DesignPoint,
    /// Performance relative to the baseline, one per workload.
    pub ratios: Vec<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub baseline: String,
    pub target_margin: f64,
    pub cache_fraction: f64,
    pub workloads: Vec<String>,
    pub points: Vec<PointResult>,
}

impl FeasibilityReport {
    pub fn feasible_points(&self) -> impl Iterator<Item = &DesignPoint> {
        self.points.iter().filter(|p| p.feasible).map(|p| &p.point)
    }

    pub fn result_for(&self, point: &DesignPoint) -> Option<&PointResult> {
        self.points.iter().find(|p| p.point == *point)
    }
}

fn is_feasible(ratios: &[f64], margin: f64) -> bool {
    ratios.iter().all(|&r| r >= 1.0 - margin)
}

pub fn sweep(workloads: &[Workload], grid: &[DesignPoint], cfg: &SweepConfig) -> Result<FeasibilityReport, ExplorerError> {
    sweep_with(workloads, grid, cfg, &Sequential)
}

pub fn sweep_with<E: Executor>(
    workloads: &[Workload],
    grid: &[DesignPoint],
    cfg: &SweepConfig,
    exec: &E,
) -> Result<FeasibilityReport, ExplorerError> {
    if grid.is_empty() {
        return Err(ExplorerError::EmptyGrid);
    }
    if workloads.is_empty() {
        return Err(ExplorerError::EmptyWorkloads);
    }
    cfg.validate()?;
    for p in grid {
        p.validate()?;
    }

    let baselines: Vec<HierarchyStats> = exec
        .map(workloads, |w| baseline_run(w, cfg))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut row_buffers: Vec<u64> = grid.iter().map(|p| p.row_buffer_bytes).collect();
    row_buffers.sort_unstable();
    row_buffers.dedup();
    let stage_keys: Vec<(usize, u64)> = (0..workloads.len())
        .flat_map(|w| row_buffers.iter().map(move |&rb| (w, rb)))
        .collect();
    let stages: Vec<CacheStage> = exec
        .map(&stage_keys, |&(w, rb)| {
            let wl = &workloads[w];
            let cache = cfg.cache_config(&wl.trace, rb, cfg.cache_fraction);
            cache_stage(&wl.trace, &cache, &cfg.options).map_err(run_err(wl))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let stage_index: BTreeMap<(usize, u64), usize> =
        stage_keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..workloads.len()).map(move |w| (p, w)))
        .collect();
    let ratios: Vec<f64> = exec
        .map(&jobs, |&(p, w)| {
            let point = &grid[p];
            let stage = &stages[stage_index[&(w, point.row_buffer_bytes)]];
            device_stage(stage, &cfg.geometry(point.row_buffer_bytes), &point.timing())
                .map(|s| relative_perf(&s, &baselines[w]))
                .map_err(run_err(&workloads[w]))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;

    let points = grid
        .iter()
        .zip(ratios.chunks(workloads.len()))
        .map(|(point, r)| PointResult {
            point: *point,
            ratios: r.to_vec(),
            feasible: is_feasible(r, cfg.target_margin),
        })
        .collect();

    Ok(FeasibilityReport {
        baseline: cfg.baseline_description(),
        target_margin: cfg.target_margin,
        cache_fraction: cfg.cache_fraction,
        workloads: workloads.iter().map(|w| w.name.clone()).collect(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub row_buffer_bytes: u64,
    pub t_read_ns: f64,
    pub max_t_write_ns: f64,
}

/// Largest feasible write latency for every (row buffer, read latency) with
/// at least one feasible point, sorted by row buffer then read latency.
pub fn frontier(report: &FeasibilityReport) -> Vec<FrontierPoint> {
    let mut out: Vec<FrontierPoint> = Vec::new();
    for p in report.feasible_points() {
        match out
            .iter_mut()
            .find(|f| f.row_buffer_bytes == p.row_buffer_bytes && f.t_read_ns == p.t_read_ns)
        {
            Some(f) => f.max_t_write_ns = f.max_t_write_ns.max(p.t_write_ns),
            None => out.push(FrontierPoint {
                row_buffer_bytes: p.row_buffer_bytes,
                t_read_ns: p.t_read_ns,
                max_t_write_ns: p.t_write_ns,
            }),
        }
    }
    out.sort_by(|a, b| {
        a.row_buffer_bytes
            .cmp(&b.row_buffer_bytes)
            .then(a.t_read_ns.total_cmp(&b.t_read_ns))
    });
    out
}

/// Pairs (feasible, infeasible) where the infeasible point dominates the
/// feasible one. An empty result means the feasible set is downward-closed.
pub fn dominance_violations(report: &FeasibilityReport) -> Vec<(DesignPoint, DesignPoint)> {
    let mut out = Vec::new();
    for good in report.points.iter().filter(|p| p.feasible) {
        for bad in report.points.iter().filter(|p| !p.feasible) {
            if bad.point.dominates(&good.point) {
                out.push((good.point, bad.point));
            }
        }
    }
    out
}

/// Points feasible at row buffer `rb` whose twin at `2 * rb` is on the grid
/// but infeasible.
pub fn widening_violations(report: &FeasibilityReport, rb: u64) -> Vec<DesignPoint> {
    report
        .points
        .iter()
        .filter(|p| p.feasible && p.point.row_buffer_bytes == rb)
        .filter(|p| {
            let twin = DesignPoint::new(2 * rb, p.point.t_read_ns, p.point.t_write_ns);
            report.result_for(&twin).is_some_and(|t| !t.feasible)
        })
        .map(|p| p.point)
        .collect()
}

/// Five synthetic workloads with distinct popularity skew, spatial footprint
/// and read mix. They are stand-ins for server applications, not models of
/// any particular one.
pub fn standard_workloads(n_records: u64, seed: u64) -> Vec<(String, SyntheticTraceSpec)> {
    let mk = |alpha: f64, read: f64, footprint: f64, contiguity: f64, salt: u64| SyntheticTraceSpec {
        n_pages: 1 << 14,
        zipf_alpha: alpha,
        read_fraction: read,
        footprint_mean: footprint,
        burst_contiguity: contiguity,
        n_records,
        seed: seed.wrapping_add(salt),
        inter_arrival_ns: None,
    };
    [
        ("key-value", mk(1.25, 0.70, 8.0, 0.5, 1)),
        ("web-search", mk(1.10, 0.75, 24.0, 0.8, 2)),
        ("analytics", mk(0.95, 0.90, 48.0, 0.95, 3)),
        ("media-streaming", mk(1.00, 0.95, 60.0, 1.0, 4)),
        ("graph", mk(1.15, 0.85, 16.0, 0.6, 5)),
    ]
    .into_iter()
    .map(|(n, s)| (n.to_string(), s))
    .collect()
}

/// A PCM product configuration for the case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcmConfig {
    pub name: String,
    pub technology: String,
    pub point: DesignPoint,
    pub cache_fraction: f64,
}

/// SLC, MLC_lat and MLC_BW with a 1/32 cache; TLC with 1/32, 1/16 and 1/8.
pub fn pcm_configurations() -> Vec<PcmConfig> {
    let mk = |name: &str, tech: &str, r: f64, w: f64, rb: u64, f: f64| PcmConfig {
        name: name.to_string(),
        technology: tech.to_string(),
        point: DesignPoint::new(rb, r, w),
        cache_fraction: f,
    };
    Vec::from([
        mk("SLC", "slc", 60.0, 150.0, 1024, 1.0 / 32.0),
        mk("MLC_lat", "mlc", 120.0, 550.0, 512, 1.0 / 32.0),
        mk("MLC_BW", "mlc", 120.0, 1000.0, 1024, 1.0 / 32.0),
        mk("TLC", "tlc", 250.0, 2350.0, 512, 1.0 / 32.0),
        mk("TLC", "tlc", 250.0, 2350.0, 512, 1.0 / 16.0),
        mk("TLC", "tlc", 250.0, 2350.0, 512, 1.0 / 8.0),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcmRow {
    pub name: String,
    pub technology: String,
    /// `None` for the DRAM reference rows.
    pub point: Option<DesignPoint>,
    pub cache_fraction: f64,
    /// Performance relative to the cached-DRAM baseline, per workload.
    pub ratios: Vec<f64>,
    pub feasible: bool,
    /// Geometric mean of performance relative to cacheless DRAM.
    pub perf_geomean: f64,
    pub cache_cost: f64,
    pub total_cost: f64,
    pub perf_per_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcmStudy {
    pub baseline: String,
    pub target_margin: f64,
    pub workloads: Vec<String>,
    pub rows: Vec<PcmRow>,
}

fn geomean(xs: &[f64]) -> f64 {
    libm::exp(xs.iter().map(|&x| libm::log(x)).sum::<f64>() / xs.len() as f64)
}

pub fn pcm_case_study(workloads: &[Workload], table: &CostTable, cfg: &SweepConfig) -> Result<PcmStudy, ExplorerError> {
    pcm_case_study_with(workloads, table, cfg, &Sequential)
}

/// Evaluates [`pcm_configurations`] plus two references: cacheless DRAM and
/// the cached-DRAM baseline.
pub fn pcm_case_study_with<E: Executor>(
    workloads: &[Workload],
    table: &CostTable,
    cfg: &SweepConfig,
    exec: &E,
) -> Result<PcmStudy, ExplorerError> {
    if workloads.is_empty() {
        return Err(ExplorerError::EmptyWorkloads);
    }
    cfg.validate()?;
    table.validate()?;

    let flat: Vec<HierarchyStats> = exec
        .map(workloads, |w| {
            simulate_flat(
                &w.trace,
                &cfg.geometry(cfg.baseline_row_buffer_bytes),
                &TimingParams::ddr4_dram(),
                &cfg.options,
            )
            .map_err(run_err(w))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let baselines: Vec<HierarchyStats> = exec
        .map(workloads, |w| baseline_run(w, cfg))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let configs = pcm_configurations();
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..workloads.len()).map(move |w| (c, w)))
        .collect();
    let runs: Vec<HierarchyStats> = exec
        .map(&jobs, |&(c, w)| point_run(&workloads[w], &configs[c].point, configs[c].cache_fraction, cfg))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let row = |name: &str, tech: &str, point: Option<DesignPoint>, fraction: f64, stats: &[HierarchyStats]| {
        let ratios: Vec<f64> = stats.iter().zip(&baselines).map(|(s, b)| relative_perf(s, b)).collect();
        let vs_flat: Vec<f64> = stats.iter().zip(&flat).map(|(s, f)| relative_perf(s, f)).collect();
        let perf = geomean(&vs_flat);
        let cost = cost_breakdown(&HierarchySpec::new(tech, fraction), table)?;
        Ok::<_, ExplorerError>(PcmRow {
            name: name.to_string(),
            technology: tech.to_string(),
            point,
            cache_fraction: fraction,
            feasible: is_feasible(&ratios, cfg.target_margin),
            ratios,
            perf_geomean: perf,
            cache_cost: cost.cache_cost,
            total_cost: cost.total_cost,
            perf_per_cost: perf_per_cost(perf, cost.total_cost)?,
        })
    };

    let mut rows = Vec::with_capacity(configs.len() + 2);
    rows.push(row("DRAM", PLANAR_DRAM, None, 0.0, &flat)?);
    rows.push(row("3D$+DRAM", PLANAR_DRAM, None, cfg.cache_fraction, &baselines)?);
    for (c, chunk) in configs.iter().zip(runs.chunks(workloads.len())) {
        rows.push(row(&c.name, &c.technology, Some(c.point), c.cache_fraction, chunk)?);
    }

    Ok(PcmStudy {
        baseline: cfg.baseline_description(),
        target_margin: cfg.target_margin,
        workloads: workloads.iter().map(|w| w.name.clone()).collect(),
        rows,
    })
}
