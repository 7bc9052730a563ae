//! Why occupancy overstates usable allocation.
//!
//! A two-task gang-scheduled job whose tasks alternate being up keeps
//! every chip nominally allocated half the time (occupancy 0.5), yet the
//! tasks are never up together, so no synchronous progress is possible
//! and scheduling goodput is zero. Built from a hand-assembled trace to
//! show the analytics work on any event log, not just simulator output.
//!
//! ```sh
//! cargo run --example legacy_vs_goodput
//! ```

use fleetsim::fleet::{ChipKind, Fleet, MeshShape, Pod};
use fleetsim::goodput::Scope;
use fleetsim::scheduler::Phase;
use fleetsim::trace::{Event, EventKind, JobMeta, Trace};
use fleetsim::{Analysis, IntervalSet};

fn main() -> fleetsim::Result<()> {
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
            shape: MeshShape { dims: vec![4] },
            cell: "cell-0".into(),
        }],
        None,
    )?;

    let horizon = 100_000_000;
    let mut submitted = Event::new(0, 0, EventKind::JobSubmitted, "gang", 4);
    submitted.meta = Some(JobMeta {
        chip_kind: "tpu-a".into(),
        generation: "gen1".into(),
        phase: Phase::Training,
        runtime_tag: "default".into(),
        framework_tag: "default".into(),
        priority: 0,
        shape: vec![4],
        tasks: 2,
        work: 100,
        flops: 1_000_000,
        peak_flops: 1e12,
    });
    let mut events = vec![submitted];
    // task 0 up for the first half, task 1 for the second; never together
    for (t, kind, task) in [
        (0, EventKind::TaskUp, 0u32),
        (50_000_000, EventKind::TaskDown, 0),
        (50_000_000, EventKind::TaskUp, 1),
        (100_000_000, EventKind::TaskDown, 1),
    ] {
        let seq = events.len() as u64;
        let mut e = Event::new(t, seq, kind, "gang", 2);
        e.task = Some(task);
        events.push(e);
    }
    let trace = Trace::synthetic(horizon, events);

    let analysis = Analysis::from_trace(&trace)?;
    let window = analysis.full_window();
    let job = &analysis.jobs["gang"];
    let task_sets: Vec<IntervalSet> = job.tasks.values().map(|(_, set)| set.clone()).collect();
    let all_up = fleetsim::goodput::all_allocated_intervals(&task_sets);
    println!("all-tasks-up time: {} s", all_up.total() as f64 / 1e6);

    let (sg, ..) = analysis.scheduling_goodput(&fleet, window, &Scope::Fleet)?;
    let legacy = analysis.legacy_metrics(&fleet, window)?;
    println!("scheduling goodput: {sg:.3}");
    println!("occupancy:          {:.3}", legacy.occupancy);
    println!("(occupancy counts each chip's own up time; goodput needs them together)");
    Ok(())
}
