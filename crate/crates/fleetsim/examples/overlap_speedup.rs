//! Hiding communication under compute on a comm-bound workload.
//!
//! A mid-run pass raises the overlap fraction from 0 to 0.9; step time
//! drops from 20 ms to 11 ms and program goodput steps up in the bucket
//! series.
//!
//! ```sh
//! cargo run --example overlap_speedup
//! ```

use std::path::Path;

use fleetsim::analytics::timeseries;
use fleetsim::{actual_step_time, apply_pass, Analysis, CompilerPass, PassEffect, Scenario};

fn main() -> fleetsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/overlap_commbound.toml");
    let scenario = Scenario::from_path(&path)?;

    let before = scenario.jobs[0].profile.clone();
    let after = apply_pass(
        &before,
        &CompilerPass {
            name: "overlap".into(),
            effect: PassEffect::SetOverlap(0.9),
        },
    );
    let (t_before, _) = actual_step_time(&before);
    let (t_after, _) = actual_step_time(&after);
    println!(
        "step time {:.1} ms -> {:.1} ms, throughput x{:.2}",
        t_before * 1e3,
        t_after * 1e3,
        t_before / t_after
    );

    let trace = fleetsim::run(scenario)?;
    let fleet = trace.header.scenario.as_ref().unwrap().build_fleet()?;
    let analysis = Analysis::from_trace(&trace)?;
    println!("program goodput per 10 s bucket:");
    for report in timeseries(&analysis, &fleet, 10_000_000)? {
        let bar_len = (report.pg.unwrap_or(0.0) * 40.0) as usize;
        println!(
            "  [{:>3.0}s, {:>3.0}s)  {:.3}  {}",
            report.window.start as f64 / 1e6,
            report.window.end as f64 / 1e6,
            report.pg.unwrap_or(f64::NAN),
            "#".repeat(bar_len)
        );
    }
    Ok(())
}
