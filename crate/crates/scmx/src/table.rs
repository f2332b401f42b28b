//! Tabular output. Every report is a [`Table`], written as CSV or, with
//! `--json`, as a JSON array of objects keyed by column name.

use std::io::{self, Write};

use scmx_core::amat::AmatRow;
use scmx_core::cache::{CacheConfig, CacheStats};
use scmx_core::cost::CostRow;
use scmx_core::explorer::{FeasibilityReport, FrontierPoint, PcmStudy};
use scmx_core::hierarchy::HierarchyStats;
use scmx_core::locality::MissCurve;
use scmx_core::memdev::DeviceStats;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::to_csv))?;
        }
        w.flush()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().cloned().zip(row.iter().map(Cell::to_json)).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn write_json<W: Write>(&self, mut sink: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut sink, &self.to_json())?;
        writeln!(sink)
    }

    pub fn write<W: Write>(&self, sink: W, format: OutputFormat) -> io::Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(sink),
            OutputFormat::Json => self.write_json(sink),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

pub fn miss_curve_table(curves: &[MissCurve], footprint_bytes: u64) -> Table {
    let mut t = Table::new(&["block_bytes", "capacity_bytes", "capacity_fraction", "miss_ratio"]);
    for c in curves {
        for p in &c.points {
            t.push(vec![
                c.block_bytes.into(),
                p.capacity_bytes.into(),
                (p.capacity_bytes as f64 / footprint_bytes as f64).into(),
                p.miss_ratio.into(),
            ]);
        }
    }
    t
}

pub fn cache_stats_table(rows: &[(CacheConfig, CacheStats)]) -> Table {
    let mut t = Table::new(&[
        "capacity", "block", "ways", "accesses", "hits", "misses", "writebacks", "mean_density",
    ]);
    for (c, s) in rows {
        t.push(vec![
            c.capacity_bytes.into(),
            c.block_bytes.into(),
            c.ways.into(),
            s.accesses.into(),
            s.hits.into(),
            s.misses.into(),
            s.writebacks.into(),
            s.mean_density().into(),
        ]);
    }
    t
}

pub fn density_table(profile: &[(u64, f64)]) -> Table {
    let mut t = Table::new(&["region_bytes", "mean_density"]);
    for &(region, d) in profile {
        t.push(vec![region.into(), d.into()]);
    }
    t
}

pub fn amat_table(rows: &[AmatRow]) -> Table {
    let mut t = Table::new(&["t_act", "transfer_bytes", "amat_ns"]);
    for r in rows {
        t.push(vec![r.t_act.into(), r.transfer_bytes.into(), r.amat_ns.into()]);
    }
    t
}

pub fn zipf_table(rows: &[(f64, u64, f64, f64)]) -> Table {
    let mut t = Table::new(&["alpha", "n_items", "coverage", "hot_fraction"]);
    for &(alpha, n, coverage, hot) in rows {
        t.push(vec![alpha.into(), n.into(), coverage.into(), hot.into()]);
    }
    t
}

pub fn frontier_table(points: &[FrontierPoint]) -> Table {
    let mut t = Table::new(&["row_buffer", "t_read_ns", "max_t_write_ns"]);
    for p in points {
        t.push(vec![p.row_buffer_bytes.into(), p.t_read_ns.into(), p.max_t_write_ns.into()]);
    }
    t
}

/// One row per (workload, design point).
pub fn feasibility_table(report: &FeasibilityReport) -> Table {
    let mut t = Table::new(&[
        "workload", "row_buffer", "t_read_ns", "t_write_ns", "ratio", "feasible",
    ]);
    for p in &report.points {
        for (w, &ratio) in report.workloads.iter().zip(&p.ratios) {
            t.push(vec![
                w.as_str().into(),
                p.point.row_buffer_bytes.into(),
                p.point.t_read_ns.into(),
                p.point.t_write_ns.into(),
                ratio.into(),
                p.feasible.into(),
            ]);
        }
    }
    t
}

pub fn cost_table(rows: &[CostRow]) -> Table {
    let mut t = Table::new(&["label", "perf_geomean", "cache_cost", "total_cost", "perf_per_cost"]);
    for r in rows {
        t.push(vec![
            r.label.as_str().into(),
            r.perf_geomean.into(),
            r.cache_cost.into(),
            r.total_cost.into(),
            r.perf_per_cost.into(),
        ]);
    }
    t
}

pub fn pcm_table(study: &PcmStudy) -> Table {
    let mut t = Table::new(&[
        "name",
        "technology",
        "row_buffer",
        "t_read_ns",
        "t_write_ns",
        "cache_fraction",
        "min_ratio",
        "feasible",
        "perf_geomean",
        "cache_cost",
        "total_cost",
        "perf_per_cost",
    ]);
    for r in &study.rows {
        let (rb, tr, tw) = match r.point {
            Some(p) => (Cell::Int(p.row_buffer_bytes), Cell::Float(p.t_read_ns), Cell::Float(p.t_write_ns)),
            None => (Cell::Text(String::new()), Cell::Text(String::new()), Cell::Text(String::new())),
        };
        let min_ratio = r.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        t.push(vec![
            r.name.as_str().into(),
            r.technology.as_str().into(),
            rb,
            tr,
            tw,
            r.cache_fraction.into(),
            min_ratio.into(),
            r.feasible.into(),
            r.perf_geomean.into(),
            r.cache_cost.into(),
            r.total_cost.into(),
            r.perf_per_cost.into(),
        ]);
    }
    t
}

const DEVICE_COLUMNS: [&str; 11] = [
    "served_requests",
    "reads",
    "writes",
    "row_hit_ratio",
    "activations",
    "mean_bytes_per_activation",
    "mean_read_latency_ns",
    "loaded_amat_ns",
    "write_drains",
    "read_queue_occupancy_mean",
    "write_queue_occupancy_mean",
];

fn device_cells(d: &DeviceStats) -> Vec<Cell> {
    vec![
        d.served_requests.into(),
        d.reads.into(),
        d.writes.into(),
        d.row_hit_ratio.into(),
        d.activations.into(),
        d.mean_bytes_per_activation.into(),
        d.mean_read_latency_ns.into(),
        d.loaded_amat_ns.into(),
        d.write_drains.into(),
        d.read_queue_occupancy_mean.into(),
        d.write_queue_occupancy_mean.into(),
    ]
}

pub fn device_table(stats: &DeviceStats) -> Table {
    let mut t = Table::new(&DEVICE_COLUMNS);
    t.push(device_cells(stats));
    t
}

pub fn hierarchy_table(stats: &HierarchyStats) -> Table {
    let mut cols = vec![
        "accesses",
        "miss_ratio",
        "writebacks",
        "mean_density",
        "hit_latency_ns",
        "end_to_end_amat_ns",
        "perf_proxy",
    ];
    cols.extend(DEVICE_COLUMNS);
    let mut t = Table::new(&cols);
    let (accesses, writebacks, density) = match &stats.cache {
        Some(c) => (c.accesses, c.writebacks, c.mean_density()),
        None => (stats.device.served_requests, 0, 0.0),
    };
    let mut row: Vec<Cell> = vec![
        accesses.into(),
        stats.miss_ratio.into(),
        writebacks.into(),
        density.into(),
        stats.hit_latency_ns.into(),
        stats.end_to_end_amat_ns.into(),
        stats.perf_proxy.into(),
    ];
    row.extend(device_cells(&stats.device));
    t.push(row);
    t
}
