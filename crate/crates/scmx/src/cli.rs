//! The `scmx` command line.
//!
//! Exit codes: 0 on success, 2 on a usage or configuration error, 1 on a
//! runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use scmx_core::amat::{amat_unloaded, burst_ns_for, AmatQuery, AmatRow};
use scmx_core::cache::{capacity_for_fraction, simulate_cache, region_density_profile, CacheConfig, DEFAULT_WAYS};
use scmx_core::cost::{cost_report, CostTable, HierarchySpec, STACKED_DRAM};
use scmx_core::explorer::{
    frontier, pcm_case_study_with, standard_workloads, sweep_with, Workload,
};
use scmx_core::hierarchy::{arrival_times, backside_requests, device_stage, simulate_flat, CacheStage};
use scmx_core::locality::{capacities_for_fractions, miss_ratio_curve, DEFAULT_CAPACITY_FRACTIONS};
use scmx_core::trace::{generate_trace, SyntheticTraceSpec, Trace};
use scmx_core::zipf::{hot_fraction, HotFractionQuery};

use crate::config::{
    load_json, parse_count, parse_fraction, parse_sizes, require_file, require_output, ConfigError, ExploreConfig,
    RunConfig, WorkloadSource,
};
use crate::parallel::RayonExecutor;
use crate::table::{self, OutputFormat, Table};
use crate::traceio::{read_trace_file, write_backside_events, write_trace, TraceFormat};

#[derive(Debug, Parser)]
#[command(name = "scmx", version, about = "Two-tier SCM memory hierarchy simulator and design-space explorer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write tables as a JSON array instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trace.
    GenTrace(GenTraceArgs),
    /// Fully-associative LRU miss-ratio curves.
    MissCurve(MissCurveArgs),
    /// Region density of a page cache at several block sizes.
    Density(DensityArgs),
    /// Closed-form access time versus transfer size.
    Amat(AmatArgs),
    /// Run one trace through a cache and/or a memory device.
    Simulate(SimulateArgs),
    /// Sweep (row buffer, read latency, write latency) and extract frontiers.
    Explore(ExploreArgs),
    /// Hierarchy cost and performance per cost.
    Cost(CostArgs),
    /// Hot fraction of a Zipf popularity distribution.
    Zipf(ZipfArgs),
    /// Evaluate the SLC/MLC/TLC PCM configurations.
    PcmStudy(PcmStudyArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// JSON synthetic trace spec.
    #[arg(long, conflicts_with = "workload")]
    pub spec: Option<PathBuf>,
    /// One of the built-in workloads.
    #[arg(long)]
    pub workload: Option<String>,
    #[arg(long, default_value_t = 16384, value_parser = parse_count)]
    pub pages: u64,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.7, value_parser = parse_fraction)]
    pub read_fraction: f64,
    /// Mean distinct 64B sub-blocks touched per page visit.
    #[arg(long, default_value_t = 16.0)]
    pub footprint: f64,
    #[arg(long, default_value_t = 0.8, value_parser = parse_fraction)]
    pub contiguity: f64,
    #[arg(long, default_value_t = 1_000_000, value_parser = parse_count)]
    pub records: u64,
    /// Overrides the seed of a spec file; for a built-in workload, the suite seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean spacing of exponential arrival offsets.
    #[arg(long)]
    pub inter_arrival_ns: Option<f64>,
    #[arg(long, default_value = "text")]
    pub format: TraceFormat,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MissCurveArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Block sizes: a list or a power-of-two range such as 64..4096.
    #[arg(long, default_value = "64..4096", value_parser = parse_sizes)]
    pub blocks: std::vec::Vec<u64>,
    /// Capacities as fractions of the trace footprint.
    #[arg(long, value_delimiter = ',', value_parser = parse_fraction)]
    pub fractions: Vec<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = "1/32", value_parser = parse_fraction)]
    pub cache_fraction: f64,
    #[arg(long, default_value = "128..4096", value_parser = parse_sizes)]
    pub regions: std::vec::Vec<u64>,
    /// Emit full cache statistics per region size.
    #[arg(long)]
    pub stats: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct AmatArgs {
    #[arg(long, value_delimiter = ',', default_value = "14,60")]
    pub t_act: Vec<f64>,
    /// Restoration charged once per transfer.
    #[arg(long, default_value_t = 0.0)]
    pub t_wr: f64,
    #[arg(long, default_value = "64..8192", value_parser = parse_sizes)]
    pub sizes: std::vec::Vec<u64>,
    #[arg(long, default_value_t = 2666.0)]
    pub data_rate: f64,
    #[arg(long, default_value_t = 8)]
    pub bus_bytes: u32,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Also write the cache's back-side request stream.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// JSON sweep config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Records per built-in workload.
    #[arg(long, value_parser = parse_count)]
    pub records: Option<u64>,
    /// Seed for the built-in workloads.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Frontier output (`row_buffer,t_read_ns,max_t_write_ns`).
    #[arg(long)]
    pub frontier: Option<PathBuf>,
    /// Full per-(workload, point) report.
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// `default` or a JSON file mapping technology to cost per bit.
    #[arg(long, default_value = "default")]
    pub table: String,
    /// `main[:fraction[:cache_technology]]`, e.g. `mlc:1/32`. Repeatable.
    #[arg(long, required = true)]
    pub spec: Vec<String>,
    /// Performance geomean per spec, in order; 1.0 when omitted.
    #[arg(long, value_delimiter = ',')]
    pub perf: Vec<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ZipfArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_count, required = true)]
    pub n: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0.7", value_parser = parse_fraction)]
    pub coverage: Vec<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct PcmStudyArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long, default_value = "default")]
    pub table: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let fmt = if cli.json { OutputFormat::Json } else { OutputFormat::Csv };
    match &cli.command {
        Command::GenTrace(a) => gen_trace(a),
        Command::MissCurve(a) => miss_curve(a, fmt),
        Command::Density(a) => density(a, fmt),
        Command::Amat(a) => amat(a, fmt),
        Command::Simulate(a) => simulate(a, fmt),
        Command::Explore(a) => explore(a, fmt),
        Command::Cost(a) => cost(a, fmt),
        Command::Zipf(a) => zipf(a, fmt),
        Command::PcmStudy(a) => pcm_study(a, fmt),
    }
}

fn emit(table: &Table, out: Option<&Path>, fmt: OutputFormat) -> CliResult<()> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(f);
            table.write(&mut w, fmt).map_err(runtime)?;
            w.flush().map_err(runtime)?;
            info!("wrote {} rows to {}", table.rows.len(), p.display());
        }
        None => {
            let stdout = io::stdout();
            table.write(stdout.lock(), fmt).map_err(runtime)?;
        }
    }
    Ok(())
}

fn check_out(out: &OutArg, key: &str) -> CliResult<()> {
    if let Some(p) = &out.out {
        require_output(p, key)?;
    }
    Ok(())
}

fn load_trace(path: &Path) -> CliResult<Trace> {
    let t = read_trace_file(path).with_context(|| format!("reading {}", path.display()))?;
    info!("loaded {} records from {}", t.len(), path.display());
    Ok(t)
}

fn builtin_spec(name: &str, records: u64, seed: u64) -> CliResult<SyntheticTraceSpec> {
    let suite = standard_workloads(records, seed);
    let names: Vec<&str> = suite.iter().map(|(n, _)| n.as_str()).collect();
    suite
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, s)| s.clone())
        .ok_or_else(|| ConfigError::new("--workload", format!("unknown workload `{name}` (known: {})", names.join(", "))).into())
}

fn gen_trace(a: &GenTraceArgs) -> CliResult<()> {
    require_output(&a.out, "--out")?;
    let spec = if let Some(p) = &a.spec {
        require_file(p, "--spec")?;
        let mut spec = load_json::<SyntheticTraceSpec>(p)?;
        if let Some(s) = a.seed {
            spec.seed = s;
        }
        spec
    } else if let Some(name) = &a.workload {
        // same seed derivation as the explore suite
        builtin_spec(name, a.records, a.seed.unwrap_or(7))?
    } else {
        SyntheticTraceSpec {
            n_pages: a.pages,
            zipf_alpha: a.alpha,
            read_fraction: a.read_fraction,
            footprint_mean: a.footprint,
            burst_contiguity: a.contiguity,
            n_records: a.records,
            seed: a.seed.unwrap_or(7),
            inter_arrival_ns: a.inter_arrival_ns,
        }
    };
    spec.validate().map_err(|e| ConfigError::new("spec", e.to_string()))?;
    let trace = generate_trace(&spec).map_err(runtime)?;
    let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let n = write_trace(trace.records(), BufWriter::new(f), a.format).map_err(runtime)?;
    info!("wrote {} records ({n} bytes) to {}", trace.len(), a.out.display());
    Ok(())
}

fn miss_curve(a: &MissCurveArgs, fmt: OutputFormat) -> CliResult<()> {
    require_file(&a.trace, "--trace")?;
    check_out(&a.out, "--out")?;
    let fractions: Vec<f64> = if a.fractions.is_empty() {
        DEFAULT_CAPACITY_FRACTIONS.to_vec()
    } else {
        a.fractions.clone()
    };
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0)) {
        return Err(ConfigError::new("--fractions", format!("fraction {f} must be positive")).into());
    }
    let trace = load_trace(&a.trace)?;
    let footprint = trace.footprint_bytes();
    let curves = a
        .blocks
        .par_iter()
        .map(|&b| miss_ratio_curve(&trace, b, &capacities_for_fractions(footprint, b, &fractions)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ConfigError::new("--blocks", e.to_string()))?;
    emit(&table::miss_curve_table(&curves, footprint), a.out.out.as_deref(), fmt)
}

fn density(a: &DensityArgs, fmt: OutputFormat) -> CliResult<()> {
    require_file(&a.trace, "--trace")?;
    check_out(&a.out, "--out")?;
    if !(a.cache_fraction > 0.0 && a.cache_fraction <= 1.0) {
        return Err(ConfigError::new("--cache-fraction", "must be in (0, 1]").into());
    }
    let trace = load_trace(&a.trace)?;
    let t = if a.stats {
        let capacity = capacity_for_fraction(trace.footprint_bytes(), a.cache_fraction, DEFAULT_WAYS);
        let rows = a
            .regions
            .par_iter()
            .map(|&r| {
                let cfg = CacheConfig::new(capacity, r, DEFAULT_WAYS);
                simulate_cache(&trace, &cfg).map(|(s, _)| (cfg, s))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::new("--regions", e.to_string()))?;
        table::cache_stats_table(&rows)
    } else {
        let profile = region_density_profile(&trace, a.cache_fraction, &a.regions)
            .map_err(|e| ConfigError::new("--regions", e.to_string()))?;
        table::density_table(&profile)
    };
    emit(&t, a.out.out.as_deref(), fmt)
}

fn amat(a: &AmatArgs, fmt: OutputFormat) -> CliResult<()> {
    check_out(&a.out, "--out")?;
    if !(a.data_rate > 0.0) || a.bus_bytes == 0 {
        return Err(ConfigError::new("--data-rate", "data rate and bus width must be positive").into());
    }
    let burst = burst_ns_for(a.data_rate, a.bus_bytes);
    let mut rows = Vec::new();
    for &t_act in &a.t_act {
        for &size in &a.sizes {
            let q = AmatQuery::new(t_act, a.t_wr, size, burst).map_err(|e| ConfigError::new("--sizes", e.to_string()))?;
            rows.push(AmatRow {
                t_act,
                transfer_bytes: size,
                amat_ns: amat_unloaded(&q),
            });
        }
    }
    emit(&table::amat_table(&rows), a.out.out.as_deref(), fmt)
}

fn load_workload(w: &WorkloadSource) -> CliResult<Trace> {
    match (&w.synthetic, &w.trace_path) {
        (Some(spec), _) => generate_trace(spec).map_err(runtime),
        (None, Some(p)) => load_trace(p),
        (None, None) => Err(ConfigError::new("workload", "no trace source").into()),
    }
}

fn simulate(a: &SimulateArgs, fmt: OutputFormat) -> CliResult<()> {
    require_file(&a.config, "--config")?;
    let cfg: RunConfig = load_json(&a.config)?;
    cfg.validate()?;
    check_out(&a.out, "--out")?;
    if let Some(p) = &a.events {
        require_output(p, "--events")?;
        if cfg.cache.is_none() {
            return Err(ConfigError::new("--events", "a back-side stream needs a cache").into());
        }
    }
    let trace = load_workload(&cfg.workload)?;

    let t = match (&cfg.cache, &cfg.device) {
        (Some(cache), device) => {
            let (stats, events) = simulate_cache(&trace, cache).map_err(|e| ConfigError::new("cache", e.to_string()))?;
            if let Some(p) = &a.events {
                let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                write_backside_events(&events, BufWriter::new(f)).map_err(runtime)?;
            }
            match device {
                None => table::cache_stats_table(&[(cache.clone(), stats)]),
                Some(d) => {
                    let arrivals = arrival_times(&trace, cfg.options.compute_ns_per_access);
                    let stage = CacheStage {
                        config: cache.clone(),
                        options: cfg.options,
                        stats,
                        requests: backside_requests(&trace, &events, &arrivals),
                    };
                    let s = device_stage(&stage, &d.geometry(), &d.timing)
                        .map_err(|e| ConfigError::new("device", e.to_string()))?;
                    table::hierarchy_table(&s)
                }
            }
        }
        (None, Some(d)) => {
            let s = simulate_flat(&trace, &d.geometry(), &d.timing, &cfg.options).map_err(runtime)?;
            table::hierarchy_table(&s)
        }
        (None, None) => unreachable!("validated"),
    };
    emit(&t, a.out.out.as_deref(), fmt)
}

fn explore_config(s: &SuiteArgs) -> CliResult<ExploreConfig> {
    let mut cfg = match &s.config {
        Some(p) => {
            require_file(p, "--config")?;
            load_json::<ExploreConfig>(p)?
        }
        None => ExploreConfig::default(),
    };
    if let Some(n) = s.records {
        cfg.suite.n_records = n;
    }
    if let Some(seed) = s.seed {
        cfg.suite.seed = seed;
    }
    if cfg.suite.n_records == 0 {
        return Err(ConfigError::new("suite.n_records", "must be positive").into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_workloads(cfg: &ExploreConfig) -> CliResult<Vec<Workload>> {
    let sources: Vec<WorkloadSource> = if cfg.workloads.is_empty() {
        standard_workloads(cfg.suite.n_records, cfg.suite.seed)
            .into_iter()
            .map(|(name, spec)| WorkloadSource {
                name,
                synthetic: Some(spec),
                trace_path: None,
            })
            .collect()
    } else {
        cfg.workloads.clone()
    };
    sources
        .par_iter()
        .map(|w| load_workload(w).map(|t| Workload { name: w.name.clone(), trace: t }))
        .collect()
}

fn executor(jobs: Option<usize>) -> CliResult<RayonExecutor> {
    if jobs == Some(0) {
        return Err(ConfigError::new("--jobs", "must be at least 1").into());
    }
    let e = RayonExecutor::new(jobs).map_err(runtime)?;
    info!("using {} worker threads", e.threads());
    Ok(e)
}

fn explore(a: &ExploreArgs, fmt: OutputFormat) -> CliResult<()> {
    let cfg = explore_config(&a.suite)?;
    check_out(&a.out, "--out")?;
    if let Some(p) = &a.frontier {
        require_output(p, "--frontier")?;
    }
    let exec = executor(a.suite.jobs)?;
    let workloads = load_workloads(&cfg)?;
    let grid = cfg.grid.points();
    info!("sweeping {} points over {} workloads", grid.len(), workloads.len());
    let report = sweep_with(&workloads, &grid, &cfg.sweep, &exec).map_err(runtime)?;
    if let Some(p) = &a.frontier {
        emit(&table::frontier_table(&frontier(&report)), Some(p), fmt)?;
    }
    emit(&table::feasibility_table(&report), a.out.out.as_deref(), fmt)
}

fn load_cost_table(arg: &str) -> CliResult<CostTable> {
    let t = if arg == "default" {
        CostTable::default()
    } else {
        let p = Path::new(arg);
        require_file(p, "--table")?;
        load_json::<CostTable>(p)?
    };
    t.validate().map_err(|e| ConfigError::new("--table", e.to_string()))?;
    Ok(t)
}

/// `main[:fraction[:cache_technology]]`.
pub fn parse_hierarchy_spec(s: &str) -> Result<HierarchySpec, String> {
    let mut parts = s.split(':');
    let main = parts.next().filter(|m| !m.is_empty()).ok_or_else(|| format!("empty spec `{s}`"))?;
    let fraction = parts.next().map(parse_fraction).transpose()?.unwrap_or(0.0);
    let cache = parts.next().unwrap_or(STACKED_DRAM);
    if parts.next().is_some() {
        return Err(format!("too many fields in `{s}`"));
    }
    Ok(HierarchySpec {
        main_technology: main.to_string(),
        cache_fraction: fraction,
        cache_technology: cache.to_string(),
    })
}

fn cost(a: &CostArgs, fmt: OutputFormat) -> CliResult<()> {
    check_out(&a.out, "--out")?;
    let table = load_cost_table(&a.table)?;
    if !a.perf.is_empty() && a.perf.len() != a.spec.len() {
        return Err(ConfigError::new("--perf", "give one value per --spec").into());
    }
    let rows = a
        .spec
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let spec = parse_hierarchy_spec(s).map_err(|m| ConfigError::new("--spec", m))?;
            Ok((s.clone(), spec, a.perf.get(i).copied().unwrap_or(1.0)))
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let report = cost_report(&rows, &table).map_err(|e| ConfigError::new("--spec", e.to_string()))?;
    emit(&table::cost_table(&report), a.out.out.as_deref(), fmt)
}

fn zipf(a: &ZipfArgs, fmt: OutputFormat) -> CliResult<()> {
    check_out(&a.out, "--out")?;
    let mut rows = Vec::new();
    for &alpha in &a.alpha {
        for &n in &a.n {
            for &coverage in &a.coverage {
                let q = HotFractionQuery {
                    alpha,
                    n_items: n,
                    coverage,
                };
                q.validate().map_err(|e| ConfigError::new("--alpha/--n/--coverage", e.to_string()))?;
                rows.push((alpha, n, coverage, hot_fraction(&q).map_err(runtime)?));
            }
        }
    }
    emit(&table::zipf_table(&rows), a.out.out.as_deref(), fmt)
}

fn pcm_study(a: &PcmStudyArgs, fmt: OutputFormat) -> CliResult<()> {
    let cfg = explore_config(&a.suite)?;
    check_out(&a.out, "--out")?;
    let costs = load_cost_table(&a.table)?;
    let exec = executor(a.suite.jobs)?;
    let workloads = load_workloads(&cfg)?;
    let study = pcm_case_study_with(&workloads, &costs, &cfg.sweep, &exec).map_err(runtime)?;
    emit(&table::pcm_table(&study), a.out.out.as_deref(), fmt)
}
