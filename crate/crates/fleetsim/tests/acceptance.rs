//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured evidence (visible under `--nocapture`).
//!
//! Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use fleetsim::analytics::{
    compare_scenarios, segment_report, simpson_check, timeseries, Metric, DEFAULT_DEADBAND,
};
use fleetsim::fleet::{ChipKind, Fleet, MeshShape, Pod};
use fleetsim::goodput::{all_allocated_intervals, Analysis, Dimension, Scope};
use fleetsim::program::{actual_step_time, apply_pass, flop_count, CompilerPass};
use fleetsim::scheduler::{
    find_placement, select_victims, Allocation, EvictionPolicy, JobRequest, LiveJob, Phase,
};
use fleetsim::time::{Interval, IntervalSet, Micros};
use fleetsim::trace::{Event, EventKind, JobMeta, Trace};
use fleetsim::Scenario;

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::from_path(&scenario_dir().join(name)).expect("bundled scenario parses")
}

const ALL_SCENARIOS: &[&str] = &[
    "minimal.toml",
    "eviction_preference.toml",
    "eviction_uniform.toml",
    "compiler_device_base.toml",
    "compiler_device_opt.toml",
    "compiler_host_base.toml",
    "compiler_host_opt.toml",
    "runtime_waste_base.toml",
    "runtime_waste_opt.toml",
    "scheduling_gap_base.toml",
    "scheduling_gap_opt.toml",
    "overlap_commbound.toml",
    "checkpoint_sweep.toml",
    "simpson.toml",
    "simpson_control.toml",
    "chip_lifecycle.toml",
];

fn meta_for(chips: u64, tasks: u32) -> JobMeta {
    JobMeta {
        chip_kind: "tpu-a".into(),
        generation: "gen1".into(),
        phase: Phase::Training,
        runtime_tag: "default".into(),
        framework_tag: "default".into(),
        priority: 0,
        shape: vec![chips as u32],
        tasks,
        work: 1,
        flops: 0,
        peak_flops: 1e12,
    }
}

/// Per-task ground truth: (chips, up intervals).
type TaskTruth = Vec<(u64, Vec<(Micros, Micros)>)>;

/// One randomized gang-scheduled job as a synthetic trace, plus its
/// per-task ground truth.
fn random_job_trace(rng: &mut StdRng, horizon: Micros) -> (Trace, TaskTruth) {
    let tasks = rng.gen_range(1..=8u32);
    let mut per_task: Vec<(u64, Vec<(Micros, Micros)>)> = Vec::new();
    let mut events: Vec<Event> = Vec::new();
    let mut total_chips = 0;
    for _ in 0..tasks {
        let chips = rng.gen_range(1..=4u64);
        total_chips += chips;
        // up to 6 up/down pairs per task keeps the job under 100 events
        let pairs = rng.gen_range(0..=6usize);
        let mut times: Vec<Micros> = (0..pairs * 2).map(|_| rng.gen_range(0..=horizon)).collect();
        times.sort_unstable();
        times.dedup();
        let mut intervals = Vec::new();
        for chunk in times.chunks(2) {
            if let [up, down] = chunk {
                if up < down {
                    intervals.push((*up, *down));
                }
            }
        }
        per_task.push((chips, intervals));
    }
    let mut submitted = Event::new(0, 0, EventKind::JobSubmitted, "job", total_chips);
    submitted.meta = Some(meta_for(total_chips, tasks));
    events.push(submitted);
    for (task, (chips, intervals)) in per_task.iter().enumerate() {
        for (up, down) in intervals {
            let mut e = Event::new(*up, 0, EventKind::TaskUp, "job", *chips);
            e.task = Some(task as u32);
            events.push(e);
            let mut e = Event::new(*down, 0, EventKind::TaskDown, "job", *chips);
            e.task = Some(task as u32);
            events.push(e);
        }
    }
    events.sort_by_key(|e| (e.t_us, e.kind == EventKind::TaskDown));
    for (i, e) in events.iter_mut().enumerate() {
        e.seq = i as u64;
    }
    (Trace::synthetic(horizon, events), per_task)
}

fn interval_set_to_ticks(set: &IntervalSet, horizon: Micros) -> Vec<bool> {
    let mut ticks = vec![false; horizon as usize];
    for iv in set.iter() {
        for t in iv.start..iv.end.min(horizon) {
            ticks[t as usize] = true;
        }
    }
    ticks
}

#[test]
fn criterion_01_interval_algebra_matches_per_tick_oracle() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(42);
    let horizon: Micros = 10_000;
    for case in 0..1000 {
        let (trace, per_task) = random_job_trace(&mut rng, horizon);
        let analysis = Analysis::from_trace(&trace).expect("synthetic trace parses");
        let job = &analysis.jobs["job"];
        // the pure intersection over the generator's ground-truth sets...
        let sets: Vec<IntervalSet> = per_task
            .iter()
            .map(|(_, intervals)| IntervalSet::from_pairs(intervals.iter().copied()))
            .collect();
        let computed = all_allocated_intervals(&sets);
        // ...agrees with what the trace replay derived
        assert_eq!(
            computed, job.all_up,
            "case {case}: replay disagrees with direct intersection"
        );

        // brute-force per-tick scan over explicit boolean arrays
        let mut all_up = vec![true; horizon as usize];
        for (_, intervals) in &per_task {
            let mut task_up = vec![false; horizon as usize];
            for (up, down) in intervals {
                for t in *up..*down {
                    task_up[t as usize] = true;
                }
            }
            for t in 0..horizon as usize {
                all_up[t] &= task_up[t];
            }
        }
        let got = interval_set_to_ticks(&computed, horizon);
        assert_eq!(
            got, all_up,
            "case {case}: interval algebra diverged from scan"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 01 PASS: 1000 randomized jobs match the per-tick oracle exactly ({:.2?})",
        elapsed
    );
}

#[test]
fn criterion_02_goodput_telescoping_on_every_bundled_scenario() {
    for name in ALL_SCENARIOS {
        let trace = fleetsim::run(load(name)).expect("runs");
        let fleet = trace
            .header
            .scenario
            .as_ref()
            .unwrap()
            .build_fleet()
            .unwrap();
        let analysis = Analysis::from_trace(&trace).unwrap();
        let window = analysis.full_window();
        let (sg, _sg_num, sg_den) = analysis
            .scheduling_goodput(&fleet, window, &Scope::Fleet)
            .unwrap();
        let (rg, rg_num, _) = analysis
            .runtime_goodput(&fleet, window, &Scope::Fleet)
            .unwrap();
        let direct = rg_num as f64 / sg_den as f64;
        assert!(
            (sg * rg - direct).abs() < 1e-12,
            "{name}: sg*rg {} vs committed/capacity {}",
            sg * rg,
            direct
        );
        let report = analysis.report(&fleet, window, Scope::Fleet);
        let (s, r, p) = (
            report.sg.unwrap(),
            report.rg.unwrap(),
            report
                .pg
                .unwrap_or_else(|| panic!("{name}: fleet pg undefined")),
        );
        assert_eq!(
            report.mpg,
            Some(s * r * p),
            "{name}: mpg is not the exact product"
        );
    }
    println!(
        "criterion 02 PASS: sg*rg telescopes within 1e-12 and mpg = sg*rg*pg exactly on {} scenarios",
        ALL_SCENARIOS.len()
    );
}

#[test]
fn criterion_03_sg_never_exceeds_occupancy() {
    let mut rng = StdRng::seed_from_u64(43);
    let horizon: Micros = 10_000;
    let fleet = Fleet::build(
        vec![ChipKind {
            name: "tpu-a".into(),
            peak_flops: 1e12,
            mtbf: 1e6,
            generation_tag: "gen1".into(),
        }],
        vec![Pod {
            id: "p0".into(),
            chip_kind: "tpu-a".into(),
            shape: MeshShape { dims: vec![32] },
            cell: "cell-0".into(),
        }],
        None,
    )
    .unwrap();
    let window = Interval::new(0, horizon);
    let mut violations = 0;
    for _ in 0..1000 {
        let (trace, _) = random_job_trace(&mut rng, horizon);
        let analysis = Analysis::from_trace(&trace).unwrap();
        let (sg, ..) = analysis
            .scheduling_goodput(&fleet, window, &Scope::Fleet)
            .unwrap();
        let occupancy = analysis.legacy_metrics(&fleet, window).unwrap().occupancy;
        if sg > occupancy + 1e-15 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);

    // alternating-tasks construction: strict inequality
    let mut submitted = Event::new(0, 0, EventKind::JobSubmitted, "gang", 4);
    submitted.meta = Some(meta_for(4, 2));
    let mut events = vec![submitted];
    for (i, (t, kind, task)) in [
        (0, EventKind::TaskUp, 0u32),
        (5_000, EventKind::TaskDown, 0),
        (5_000, EventKind::TaskUp, 1),
        (10_000, EventKind::TaskDown, 1),
    ]
    .into_iter()
    .enumerate()
    {
        let mut e = Event::new(t, i as u64 + 1, kind, "gang", 2);
        e.task = Some(task);
        events.push(e);
    }
    let trace = Trace::synthetic(horizon, events);
    let analysis = Analysis::from_trace(&trace).unwrap();
    let (sg, ..) = analysis
        .scheduling_goodput(&fleet, window, &Scope::Fleet)
        .unwrap();
    let occupancy = analysis.legacy_metrics(&fleet, window).unwrap().occupancy;
    assert!(
        sg < occupancy,
        "alternating tasks: sg {sg} not strictly below occupancy {occupancy}"
    );
    println!(
        "criterion 03 PASS: sg <= occupancy on 1000 randomized traces (0 violations), strict on alternating tasks ({sg} < {occupancy})"
    );
}

#[test]
fn criterion_04_directional_matrix_reproduced() {
    let started = Instant::now();
    let pairs = [
        (
            "compiler_device_base.toml",
            "compiler_device_opt.toml",
            "jobs[0].profile.device_compute_time",
            [Some(-1), Some(-1), Some(1), Some(1)],
        ),
        (
            "compiler_host_base.toml",
            "compiler_host_opt.toml",
            "jobs[0].profile.device_compute_time",
            [None, None, None, Some(0)],
        ),
        (
            "runtime_waste_base.toml",
            "runtime_waste_opt.toml",
            "jobs[0].runtime.checkpoint_write_time",
            [Some(-1), Some(1), Some(0), Some(1)],
        ),
        (
            "scheduling_gap_base.toml",
            "scheduling_gap_opt.toml",
            "jobs[0].arrival",
            [Some(1), Some(0), Some(0), Some(1)],
        ),
    ];
    for (base, opt, factor, expected) in pairs {
        let trace_a = fleetsim::run(load(base)).unwrap();
        let trace_b = fleetsim::run(load(opt)).unwrap();
        let verdict = compare_scenarios(&trace_a, &trace_b, factor, DEFAULT_DEADBAND).unwrap();
        assert!(verdict.matched, "{base} vs {opt}: {:#?}", verdict.deltas);
        for (delta, expect) in verdict.deltas.iter().zip(expected) {
            if let Some(e) = expect {
                assert_eq!(delta.sign, e, "{base}: {} sign", delta.metric);
            }
        }
        // the gate is antisymmetric: the inverted pair must mismatch
        let inverted = compare_scenarios(&trace_b, &trace_a, factor, DEFAULT_DEADBAND).unwrap();
        for (fwd, rev) in verdict.deltas.iter().zip(inverted.deltas.iter()) {
            assert_eq!(fwd.sign, -rev.sign, "antisymmetry on {}", fwd.metric);
        }

        // the command-level gate agrees: exit 0 forward, exit 5 inverted
        let dir = tempfile::tempdir().unwrap();
        let (path_a, path_b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        assert_eq!(
            fleetsim::cli::cmd_simulate(&scenario_dir().join(base), &path_a),
            0
        );
        assert_eq!(
            fleetsim::cli::cmd_simulate(&scenario_dir().join(opt), &path_b),
            0
        );
        assert_eq!(
            fleetsim::cli::cmd_compare(&path_a, &path_b, factor, None),
            0
        );
        if expected.iter().any(|e| matches!(e, Some(s) if *s != 0)) {
            // a genuinely directional row must gate-fail when inverted
            assert_eq!(
                fleetsim::cli::cmd_compare(&path_b, &path_a, factor, None),
                5
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "criterion 04 PASS: all three rows (plus host-bound variant) match expected signs and gate exit codes ({:.2?})",
        elapsed
    );
}

fn sg_by_size(name: &str) -> BTreeMap<String, f64> {
    let trace = fleetsim::run(load(name)).unwrap();
    let fleet = trace
        .header
        .scenario
        .as_ref()
        .unwrap()
        .build_fleet()
        .unwrap();
    let analysis = Analysis::from_trace(&trace).unwrap();
    segment_report(
        &analysis,
        &fleet,
        analysis.full_window(),
        Dimension::SizeClass,
    )
    .into_iter()
    .map(|r| (r.scope.to_string(), r.sg.unwrap()))
    .collect()
}

#[test]
fn criterion_05_eviction_preference_shapes_sg_by_size() {
    let started = Instant::now();
    let pref = sg_by_size("eviction_preference.toml");
    let uniform = sg_by_size("eviction_uniform.toml");
    let sg = |m: &BTreeMap<String, f64>, k: &str| m[&format!("size_class={k}")];

    assert!(sg(&pref, "xl") > sg(&pref, "medium"));
    assert!(sg(&pref, "small") > sg(&pref, "medium"));

    let small_gap_pref = sg(&pref, "small") - sg(&pref, "medium");
    let small_gap_uniform = sg(&uniform, "small") - sg(&uniform, "medium");
    let xl_gap_pref = sg(&pref, "xl") - sg(&pref, "medium");
    let xl_gap_uniform = sg(&uniform, "xl") - sg(&uniform, "medium");
    assert!(
        small_gap_uniform < small_gap_pref,
        "small-medium gap must shrink or reverse: {small_gap_pref} -> {small_gap_uniform}"
    );
    assert!(
        xl_gap_uniform < xl_gap_pref,
        "xl-medium gap must shrink or reverse: {xl_gap_pref} -> {xl_gap_uniform}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 05 PASS: sg(xl)={:.3} > sg(medium)={:.3} < sg(small)={:.3}; gaps shrink under uniform eviction ({:+.3} -> {:+.3}) ({:.2?})",
        sg(&pref, "xl"), sg(&pref, "medium"), sg(&pref, "small"),
        small_gap_pref, small_gap_uniform, elapsed
    );
}

#[test]
fn criterion_06_overlap_speedup_bounded_and_pg_monotone() {
    let scenario = load("overlap_commbound.toml");
    let profile = scenario.jobs[0].profile.clone();
    assert_eq!(profile.device_compute_time, 0.010);
    assert_eq!(profile.comm_time, 0.010);

    let pass = &scenario.passes[0];
    let optimized = apply_pass(
        &profile,
        &CompilerPass {
            name: pass.name.clone(),
            effect: pass.effect.clone(),
        },
    );
    let before = actual_step_time(&profile).0;
    let after = actual_step_time(&optimized).0;
    let speedup = before / after;
    assert!(speedup > 1.0 && speedup <= 2.0, "speedup {speedup}");

    // the trace shows strictly higher program goodput after the pass
    let trace = fleetsim::run(scenario).unwrap();
    let fleet = trace
        .header
        .scenario
        .as_ref()
        .unwrap()
        .build_fleet()
        .unwrap();
    let analysis = Analysis::from_trace(&trace).unwrap();
    let buckets = timeseries(&analysis, &fleet, 10_000_000).unwrap();
    let pg_first = buckets.first().unwrap().pg.unwrap();
    let pg_last = buckets.last().unwrap().pg.unwrap();
    assert!(pg_last > pg_first, "pg {pg_first} -> {pg_last}");

    // step throughput (hence program goodput) is monotone in overlap
    let mut last = f64::INFINITY;
    for i in 0..=10 {
        let mut p = profile.clone();
        p.overlap_fraction = i as f64 / 10.0;
        let t = actual_step_time(&p).0;
        assert!(
            t <= last + 1e-15,
            "step time not monotone at overlap {}",
            p.overlap_fraction
        );
        last = t;
    }
    println!(
        "criterion 06 PASS: overlap 0 -> 0.9 gives x{speedup:.2} throughput (bounded by the comm share) and pg {pg_first:.3} -> {pg_last:.3}"
    );
}

#[test]
fn criterion_07_flop_counts_invariant_under_pass_schedules() {
    let mut graphs_checked = 0;
    for name in ALL_SCENARIOS {
        let scenario = load(name);
        let before: Vec<u64> = scenario
            .op_graphs
            .iter()
            .map(|g| flop_count(g).unwrap())
            .collect();
        // apply the full pass schedule to every job profile
        let mut profiles: Vec<_> = scenario.jobs.iter().map(|j| j.profile.clone()).collect();
        for pass in &scenario.passes {
            for (job, profile) in scenario.jobs.iter().zip(profiles.iter_mut()) {
                if pass.job == "*" || pass.job == job.id {
                    *profile = apply_pass(
                        profile,
                        &CompilerPass {
                            name: pass.name.clone(),
                            effect: pass.effect.clone(),
                        },
                    );
                }
            }
        }
        let after: Vec<u64> = scenario
            .op_graphs
            .iter()
            .map(|g| flop_count(g).unwrap())
            .collect();
        assert_eq!(before, after, "{name}: flop counts changed");
        graphs_checked += before.len();

        // actual step time is the only channel through which passes act
        for (job, transformed) in scenario.jobs.iter().zip(&profiles) {
            let graph = scenario.graph(&job.graph).unwrap();
            let ideal_before = flop_count(graph).unwrap();
            let _ = actual_step_time(transformed);
            assert_eq!(ideal_before, flop_count(graph).unwrap());
        }
    }
    println!(
        "criterion 07 PASS: {graphs_checked} graph flop counts bit-identical across all bundled pass schedules"
    );
}

fn fleet_rg(scenario: Scenario) -> f64 {
    let trace = fleetsim::run(scenario).unwrap();
    let fleet = trace
        .header
        .scenario
        .as_ref()
        .unwrap()
        .build_fleet()
        .unwrap();
    let analysis = Analysis::from_trace(&trace).unwrap();
    analysis
        .runtime_goodput(&fleet, analysis.full_window(), &Scope::Fleet)
        .unwrap()
        .0
}

#[test]
fn criterion_08_checkpoint_economics() {
    let started = Instant::now();
    let base = load("checkpoint_sweep.toml");
    let intervals = [1u64, 5, 20, 100];
    let rg: Vec<f64> = intervals
        .iter()
        .map(|&k| {
            fleet_rg(
                base.with_param("jobs[0].runtime.checkpoint_interval", serde_json::json!(k))
                    .unwrap(),
            )
        })
        .collect();
    let argmax = (0..rg.len())
        .max_by(|&a, &b| rg[a].total_cmp(&rg[b]))
        .unwrap();
    assert!(
        argmax != 0 && argmax != rg.len() - 1,
        "no interior maximum: rg = {rg:?}"
    );
    assert!(rg[argmax] > rg[0] && rg[argmax] > rg[rg.len() - 1]);

    // zero write cost: nothing to amortize, so larger intervals only lose
    let zero_write = base
        .with_param(
            "jobs[0].runtime.checkpoint_write_time",
            serde_json::json!(0.0),
        )
        .unwrap();
    let rg0: Vec<f64> = intervals
        .iter()
        .map(|&k| {
            fleet_rg(
                zero_write
                    .with_param("jobs[0].runtime.checkpoint_interval", serde_json::json!(k))
                    .unwrap(),
            )
        })
        .collect();
    for pair in rg0.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-12,
            "zero-write rg not non-increasing: {rg0:?}"
        );
    }

    // paired async vs sync
    let sync_rg = fleet_rg(base.clone());
    let async_rg = fleet_rg(
        base.with_param("jobs[0].runtime.async_checkpoint", serde_json::json!(true))
            .unwrap(),
    );
    assert!(async_rg >= sync_rg, "async {async_rg} < sync {sync_rg}");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 08 PASS: interior rg max at interval {} ({rg:?}); zero-write monotone; async {async_rg:.4} >= sync {sync_rg:.4} ({:.2?})",
        intervals[argmax], elapsed
    );
}

#[test]
fn criterion_09_failure_rate_calibration() {
    let mut total = 0usize;
    let seeds = 30u64;
    for seed in 0..seeds {
        total += fleetsim::inject_failures(seed, 1000, 1e6, 10_000_000_000).len();
    }
    let mean = total as f64 / seeds as f64;
    assert!(
        (mean - 10.0).abs() <= 2.0,
        "mean failures {mean} outside 10 +/- 2"
    );
    println!("criterion 09 PASS: mean failures {mean:.2} over {seeds} seeds (expected 10 +/- 2)");
}

#[test]
fn criterion_10_simpson_detection_with_evidence() {
    let run_check = |name: &str| {
        let trace = fleetsim::run(load(name)).unwrap();
        let fleet = trace
            .header
            .scenario
            .as_ref()
            .unwrap()
            .build_fleet()
            .unwrap();
        let analysis = Analysis::from_trace(&trace).unwrap();
        let mid = analysis.horizon / 2;
        let (w1, w2) = (Interval::new(0, mid), Interval::new(mid, analysis.horizon));
        let before = segment_report(&analysis, &fleet, w1, Dimension::FrameworkTag);
        let after = segment_report(&analysis, &fleet, w2, Dimension::FrameworkTag);
        let agg_b = analysis.report(&fleet, w1, Scope::Fleet);
        let agg_a = analysis.report(&fleet, w2, Scope::Fleet);
        (
            simpson_check(
                Metric::Pg,
                &before,
                &after,
                &agg_b,
                &agg_a,
                DEFAULT_DEADBAND,
            ),
            before,
            after,
        )
    };

    let (finding, before, after) = run_check("simpson.toml");
    assert!(finding.flagged, "paradox construction must raise the flag");
    assert_eq!(finding.aggregate_sign, -1);
    assert_eq!(finding.segments.len(), 2);
    for evidence in &finding.segments {
        assert_eq!(evidence.sign, 1, "every segment improves");
        // evidence weights are exactly the segments' committed chip-time
        let b = before
            .iter()
            .find(|r| r.scope.to_string() == evidence.segment)
            .unwrap();
        let a = after
            .iter()
            .find(|r| r.scope.to_string() == evidence.segment)
            .unwrap();
        assert_eq!(evidence.weight_before, b.pg_den);
        assert_eq!(evidence.weight_after, a.pg_den);
    }
    // the shift: the strong segment dominates before, the weak one after
    let apollo = finding
        .segments
        .iter()
        .find(|s| s.segment.contains("apollo"))
        .unwrap();
    assert!(apollo.weight_after < apollo.weight_before / 4.0);

    let (control, ..) = run_check("simpson_control.toml");
    assert!(!control.flagged, "concordant control must stay quiet");
    assert_eq!(control.aggregate_sign, 1);

    println!(
        "criterion 10 PASS: paradox flagged (aggregate {:.3} -> {:.3} against 2 rising segments, apollo weight {:.0} -> {:.0} chip-s); control quiet",
        finding.aggregate_before, finding.aggregate_after,
        apollo.weight_before, apollo.weight_after
    );
}

/// Replay a trace's allocations and assert no two jobs ever share a chip.
fn audit_chip_overlaps(trace: &Trace) -> usize {
    let fleet = trace
        .header
        .scenario
        .as_ref()
        .unwrap()
        .build_fleet()
        .unwrap();
    let mut held: BTreeMap<(String, usize), String> = BTreeMap::new();
    let mut live: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
    let mut audited = 0;
    for e in &trace.events {
        match e.kind {
            EventKind::TasksAllocated => {
                let pod_id = e.pod.clone().unwrap();
                let pod = fleet.pod(&pod_id).unwrap();
                let alloc = Allocation {
                    job_id: e.job.clone(),
                    pod_id: pod_id.clone(),
                    origin: e.origin.clone().unwrap(),
                    shape: e.shape.clone().unwrap(),
                    start: e.t_us,
                };
                let mut chips = Vec::new();
                for chip in alloc.linear_chips(&pod.shape.dims) {
                    let key = (pod_id.clone(), chip);
                    if let Some(other) = held.insert(key.clone(), e.job.clone()) {
                        panic!(
                            "chip {chip} of {pod_id} double-booked by {other} and {} at t={}",
                            e.job, e.t_us
                        );
                    }
                    chips.push(key);
                    audited += 1;
                }
                live.insert(e.job.clone(), chips);
            }
            EventKind::AllUpEnd => {
                for key in live.remove(&e.job).unwrap_or_default() {
                    held.remove(&key);
                }
            }
            _ => {}
        }
    }
    audited
}

#[test]
fn criterion_11_determinism_safety_and_victim_minimality() {
    // byte-identical traces on every bundled scenario
    let mut audited_chips = 0;
    for name in ALL_SCENARIOS {
        let a = fleetsim::run(load(name)).unwrap();
        let b = fleetsim::run(load(name)).unwrap();
        assert_eq!(
            a.to_text(),
            b.to_text(),
            "{name}: traces differ across runs"
        );
        audited_chips += audit_chip_overlaps(&a);
    }

    // victim minimality versus exhaustive subset search
    let mut rng = StdRng::seed_from_u64(44);
    let fleet = Fleet::build(
        vec![ChipKind {
            name: "tpu-a".into(),
            peak_flops: 1e12,
            mtbf: 1e6,
            generation_tag: "gen1".into(),
        }],
        vec![Pod {
            id: "p0".into(),
            chip_kind: "tpu-a".into(),
            shape: MeshShape { dims: vec![12] },
            cell: "cell-0".into(),
        }],
        Some([2, 4, 8]),
    )
    .unwrap();
    let pod = fleet.pods[0].clone();
    let request = |id: &str, extent: u32, priority: i64| JobRequest {
        job_id: id.into(),
        priority,
        chip_kind: "tpu-a".into(),
        shape: MeshShape { dims: vec![extent] },
        arrival: 0,
        work: 1,
        phase: Phase::Training,
        runtime_tag: "default".into(),
        framework_tag: "default".into(),
        cell: None,
    };
    let mut checked = 0;
    for _ in 0..300 {
        // pack up to 6 random live jobs left to right with random gaps
        let mut live = BTreeMap::new();
        let mut cursor = 0u32;
        for i in 0..rng.gen_range(1..=6) {
            let gap = rng.gen_range(0..=1u32);
            let extent = rng.gen_range(1..=3u32);
            if cursor + gap + extent > 12 {
                break;
            }
            cursor += gap;
            let id = format!("j{i}");
            live.insert(
                id.clone(),
                LiveJob {
                    request: request(&id, extent, rng.gen_range(0..3)),
                    alloc: Allocation {
                        job_id: id.clone(),
                        pod_id: "p0".into(),
                        origin: vec![cursor],
                        shape: vec![extent],
                        start: rng.gen_range(0..100),
                    },
                },
            );
            cursor += extent;
        }
        if live.is_empty() {
            continue;
        }
        let incoming = request("new", rng.gen_range(2..=10), rng.gen_range(1..4));
        let pod_live: Vec<&Allocation> = live.values().map(|j| &j.alloc).collect();
        if find_placement(&incoming, &pod, &pod_live).is_some() {
            continue; // direct placement: victim search not defined
        }
        let got = select_victims(&incoming, &fleet, &live, &EvictionPolicy::default());

        // exhaustive minimum over all subsets of strictly-lower-priority jobs
        let candidates: Vec<&LiveJob> = live
            .values()
            .filter(|j| j.request.priority < incoming.priority)
            .collect();
        let mut best: Option<usize> = None;
        for mask in 1u32..(1 << candidates.len()) {
            let removed: Vec<&str> = candidates
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, j)| j.request.job_id.as_str())
                .collect();
            let remaining: Vec<&Allocation> = live
                .values()
                .map(|j| &j.alloc)
                .filter(|a| !removed.contains(&a.job_id.as_str()))
                .collect();
            if find_placement(&incoming, &pod, &remaining).is_some() {
                let k = removed.len();
                best = Some(best.map_or(k, |b: usize| b.min(k)));
            }
        }
        match (got, best) {
            (None, None) => {}
            (Some(victims), Some(minimum)) => {
                assert_eq!(victims.len(), minimum, "victim set not minimal");
            }
            (got, best) => panic!("feasibility disagreement: got {got:?}, oracle {best:?}"),
        }
        checked += 1;
    }
    assert!(
        checked > 100,
        "too few eviction instances exercised: {checked}"
    );
    println!(
        "criterion 11 PASS: {} scenarios byte-identical across reruns, {audited_chips} chip bookings overlap-free, {checked} victim sets minimal vs exhaustive search",
        ALL_SCENARIOS.len()
    );
}
