use proptest::prelude::*;
use scmx_core::amat::{amat_unloaded, AmatQuery};
use scmx_core::memdev::{simulate_device, DeviceGeometry, DeviceRequest, SchedulingPolicy, TimingParams};
use scmx_core::trace::Op;

fn geometry(ranks: u32, banks: u32, row: u64) -> DeviceGeometry {
    DeviceGeometry {
        ranks,
        banks_per_rank: banks,
        row_buffer_bytes: row,
        capacity_bytes: 1 << 30,
        queue_depth: 32,
    }
}

/// Mixed reads and writes of 64B..row bytes, aligned within one row.
fn requests(row: u64) -> impl Strategy<Value = Vec<DeviceRequest>> {
    let max_blocks = row / 64;
    prop::collection::vec((0.0f64..40.0, any::<bool>(), 0u64..(1 << 14), 1..=max_blocks), 1..200).prop_map(
        move |items| {
            let mut t = 0.0;
            items
                .into_iter()
                .map(|(gap, w, slot, blocks)| {
                    t += gap;
                    let size = blocks * 64;
                    let base = slot * row;
                    DeviceRequest {
                        arrival_ns: t,
                        op: if w { Op::Write } else { Op::Read },
                        address: base + (row - size) / 64 / 2 * 64,
                        size_bytes: size,
                    }
                })
                .collect()
        },
    )
}

fn timing() -> impl Strategy<Value = TimingParams> {
    prop_oneof![
        Just(TimingParams::ddr4_dram()),
        (14.0f64..600.0, 9.0f64..3000.0).prop_map(|(r, w)| TimingParams::scm(r, w)),
    ]
}

fn policy() -> impl Strategy<Value = SchedulingPolicy> {
    prop_oneof![Just(SchedulingPolicy::OpenRowFrFcfs), Just(SchedulingPolicy::OpenRowFcfs)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn channel_conservation(
        reqs in requests(1024),
        t in timing(),
        pol in policy(),
        ranks in 1u32..=2,
        banks_log in 0u32..4,
    ) {
        let geo = geometry(ranks, 1 << banks_log, 1024);
        let run = simulate_device(&reqs, &geo, &t, pol).unwrap();
        let s = &run.stats;
        prop_assert_eq!(run.completions.len(), reqs.len());
        let mut seen = vec![false; reqs.len()];
        for c in &run.completions {
            prop_assert!(!seen[c.request]);
            seen[c.request] = true;
            prop_assert!(c.issue_ns >= reqs[c.request].arrival_ns);
            prop_assert!(c.data_start_ns >= c.issue_ns);
            prop_assert!(c.finish_ns > c.data_start_ns);
        }
        prop_assert_eq!(s.served_requests, s.reads + s.writes);
        prop_assert_eq!(s.reads as usize, reqs.iter().filter(|r| r.op == Op::Read).count());

        let bursts: u64 = reqs.iter().map(|r| r.size_bytes / 64).sum();
        let burst_time = bursts as f64 * t.burst_ns();
        prop_assert!(burst_time <= s.busy_time_ns + 1e-6);
        prop_assert!(s.busy_time_ns <= s.span_ns + 1e-6);

        let mut bus: Vec<(f64, f64)> = run.completions.iter().map(|c| (c.data_start_ns, c.finish_ns)).collect();
        bus.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in bus.windows(2) {
            prop_assert!(w[1].0 >= w[0].1 - 1e-6);
        }
    }

    #[test]
    fn every_read_pays_at_least_the_row_hit_path(reqs in requests(2048), t in timing(), pol in policy()) {
        let geo = geometry(2, 8, 2048);
        let run = simulate_device(&reqs, &geo, &t, pol).unwrap();
        for c in &run.completions {
            let r = &reqs[c.request];
            if r.op == Op::Read {
                let floor = t.t_cas + (r.size_bytes / 64) as f64 * t.burst_ns();
                prop_assert!(c.finish_ns - r.arrival_ns >= floor - 1e-6);
            }
        }
    }

    #[test]
    fn loaded_never_beats_closed_form(
        gaps in prop::collection::vec(0.0f64..300.0, 1..120),
        row_log in 9u32..13,
        t_read in 14.0f64..500.0,
        pol in policy(),
    ) {
        let row = 1u64 << row_log;
        let t = TimingParams::scm(t_read, 150.0);
        let mut at = 0.0;
        let reqs: Vec<DeviceRequest> = gaps
            .iter()
            .enumerate()
            .map(|(i, g)| {
                at += g;
                DeviceRequest { arrival_ns: at, op: Op::Read, address: i as u64 * row, size_bytes: row }
            })
            .collect();
        let run = simulate_device(&reqs, &geometry(1, 1, row), &t, pol).unwrap();
        let closed = amat_unloaded(&AmatQuery::new(t.t_rcd, 0.0, row, t.burst_ns()).unwrap());
        prop_assert!(run.stats.loaded_amat_ns >= closed - 1e-9);
    }

    #[test]
    fn scm_with_dram_values_is_dram(reqs in requests(1024), pol in policy()) {
        let dram = TimingParams::ddr4_dram();
        let scm = TimingParams { t_rc: 38.0, t_rrd_pre: 3.0, t_rrd_act: 3.0, ..TimingParams::scm(14.0, 9.0) };
        prop_assert_eq!(scm, dram);
        let geo = geometry(2, 8, 1024);
        let a = simulate_device(&reqs, &geo, &dram, pol).unwrap();
        let b = simulate_device(&reqs, &geo, &scm, pol).unwrap();
        prop_assert_eq!(a.completions, b.completions);
        prop_assert_eq!(a.stats, b.stats);
    }
}

#[test]
fn row_hit_ratio_endpoints() {
    let t = TimingParams::ddr4_dram();
    let geo = geometry(2, 8, 2048);
    let within: Vec<DeviceRequest> = (0..32)
        .map(|i| DeviceRequest { arrival_ns: i as f64 * 100.0, op: Op::Read, address: i * 64, size_bytes: 64 })
        .collect();
    let one = geometry(1, 1, 2048);
    let run = simulate_device(&within, &one, &t, SchedulingPolicy::OpenRowFrFcfs).unwrap();
    assert_eq!(run.stats.activations, 1);
    assert!((run.stats.row_hit_ratio - 31.0 / 32.0).abs() < 1e-12);

    let stride = 2048 * 16;
    let strided: Vec<DeviceRequest> = (0..32)
        .map(|i| DeviceRequest { arrival_ns: i as f64 * 100.0, op: Op::Read, address: i * stride, size_bytes: 64 })
        .collect();
    let run = simulate_device(&strided, &geo, &t, SchedulingPolicy::OpenRowFrFcfs).unwrap();
    assert_eq!(run.stats.row_hit_ratio, 0.0);
}
