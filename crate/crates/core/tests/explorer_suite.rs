use scmx_core::cache::region_density_profile;
use scmx_core::cost::CostTable;
use scmx_core::explorer::{
    dominance_violations, frontier, grid, pcm_case_study, standard_workloads, sweep, widening_violations,
    SweepConfig, Workload, DEFAULT_T_READ_NS, DEFAULT_T_WRITE_NS, WIDENING_DENSITY_THRESHOLD,
};
use scmx_core::trace::{generate_trace, SyntheticTraceSpec};

fn suite(n_records: u64) -> Vec<Workload> {
    standard_workloads(n_records, 7)
        .into_iter()
        .map(|(name, spec)| Workload::new(&name, generate_trace(&spec).unwrap()))
        .collect()
}

fn streaming(n_records: u64, seed: u64) -> Workload {
    let spec = SyntheticTraceSpec {
        n_pages: 1 << 14,
        zipf_alpha: 1.0,
        read_fraction: 0.95,
        footprint_mean: 64.0,
        burst_contiguity: 1.0,
        n_records,
        seed,
        inter_arrival_ns: None,
    };
    Workload::new("streaming", generate_trace(&spec).unwrap())
}

#[test]
fn dram_latencies_feasible_at_every_row_buffer() {
    let workloads = suite(1_000_000);
    let report = sweep(&workloads, &grid(&[512, 1024, 2048, 4096], &[14.0], &[9.0]), &SweepConfig::default()).unwrap();
    for p in &report.points {
        assert!(p.feasible, "{:?} ratios {:?}", p.point, p.ratios);
    }
}

#[test]
fn sweep_is_reproducible() {
    let cfg = SweepConfig::default();
    let g = grid(&[512, 1024], &[60.0, 250.0], &[150.0, 1000.0]);
    let a = sweep(&suite(100_000), &g, &cfg).unwrap();
    let b = sweep(&suite(100_000), &g, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(frontier(&a), frontier(&b));
}

#[test]
fn suite_feasible_set_is_downward_closed() {
    let g = grid(&[512, 1024, 2048], &[60.0, 125.0, 250.0, 500.0], &[150.0, 500.0, 1000.0, 2000.0]);
    let report = sweep(&suite(300_000), &g, &SweepConfig::default()).unwrap();
    assert!(dominance_violations(&report).is_empty());
}

#[test]
fn dense_workload_widens_with_row_buffer() {
    let w = streaming(1_000_000, 3);
    let density = region_density_profile(&w.trace, 1.0 / 32.0, &[1024, 2048]).unwrap();
    assert!(density.iter().all(|&(_, d)| d > WIDENING_DENSITY_THRESHOLD), "{density:?}");

    let g = grid(&[1024, 2048], &DEFAULT_T_READ_NS, &DEFAULT_T_WRITE_NS);
    let report = sweep(&[w], &g, &SweepConfig::default()).unwrap();
    assert!(widening_violations(&report, 1024).is_empty());

    let bound = |rb: u64, r: f64| {
        frontier(&report)
            .iter()
            .find(|f| f.row_buffer_bytes == rb && f.t_read_ns == r)
            .map(|f| f.max_t_write_ns)
    };
    let mut checked = 0;
    for &r in &DEFAULT_T_READ_NS {
        let Some(small) = bound(1024, r) else { continue };
        let big = bound(2048, r).expect("2KB keeps every 1KB-feasible read latency");
        let step = DEFAULT_T_WRITE_NS.iter().rposition(|&w| w <= 2.0 * small).unwrap_or(0);
        let floor = DEFAULT_T_WRITE_NS[step.saturating_sub(1)];
        assert!(big >= floor, "t_read {r}: 1KB bound {small}, 2KB bound {big}, expected >= {floor}");
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn pcm_products_order_by_latency() {
    let workloads = suite(1_000_000);
    let study = pcm_case_study(&workloads, &CostTable::default(), &SweepConfig::default()).unwrap();
    let row = |name: &str| study.rows.iter().find(|r| r.name == name).unwrap();
    let (slc, mlc_lat, mlc_bw) = (row("SLC"), row("MLC_lat"), row("MLC_BW"));
    let tlc = study
        .rows
        .iter()
        .find(|r| r.name == "TLC" && r.cache_fraction == 1.0 / 32.0)
        .unwrap();
    for (i, w) in study.workloads.iter().enumerate() {
        assert!(slc.ratios[i] >= mlc_lat.ratios[i], "{w}: SLC below MLC_lat");
        assert!(mlc_lat.ratios[i] >= tlc.ratios[i], "{w}: MLC_lat below TLC");
    }
    assert!(mlc_lat.perf_geomean >= mlc_bw.perf_geomean);

    // The 1KB buffer of MLC_BW only pays off where blocks are dense.
    let mut sparse = 0;
    for (i, w) in workloads.iter().enumerate() {
        let density = region_density_profile(&w.trace, 1.0 / 32.0, &[1024]).unwrap()[0].1;
        if density < WIDENING_DENSITY_THRESHOLD {
            assert!(mlc_lat.ratios[i] >= mlc_bw.ratios[i], "{}: MLC_lat below MLC_BW", w.name);
            sparse += 1;
        }
    }
    assert!(sparse >= 3);
    let tlc_sizes: Vec<f64> = study.rows.iter().filter(|r| r.name == "TLC").map(|r| r.perf_geomean).collect();
    assert!(tlc_sizes.windows(2).all(|p| p[1] >= p[0]), "{tlc_sizes:?}");
}
