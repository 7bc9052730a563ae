//! Aggregate trends can contradict every segment they summarize.
//!
//! In the bundled construction a compiler pass improves program goodput
//! inside both framework segments, but committed chip-time shifts
//! toward the weaker segment and the aggregate falls. The mix-shift
//! check flags exactly this situation, with segment weights as
//! evidence; the control scenario keeps weights steady and stays quiet.
//!
//! ```sh
//! cargo run --example simpson_paradox
//! ```

use std::path::Path;

use fleetsim::analytics::{segment_report, simpson_check, Metric, DEFAULT_DEADBAND};
use fleetsim::goodput::{Dimension, Scope};
use fleetsim::time::Interval;
use fleetsim::{Analysis, Scenario};

fn check(scenario_file: &str) -> fleetsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(scenario_file);
    let trace = fleetsim::run(Scenario::from_path(&path)?)?;
    let fleet = trace.header.scenario.as_ref().unwrap().build_fleet()?;
    let analysis = Analysis::from_trace(&trace)?;
    let mid = analysis.horizon / 2;
    let (w1, w2) = (Interval::new(0, mid), Interval::new(mid, analysis.horizon));

    let before = segment_report(&analysis, &fleet, w1, Dimension::FrameworkTag);
    let after = segment_report(&analysis, &fleet, w2, Dimension::FrameworkTag);
    let agg_before = analysis.report(&fleet, w1, Scope::Fleet);
    let agg_after = analysis.report(&fleet, w2, Scope::Fleet);
    let finding = simpson_check(
        Metric::Pg,
        &before,
        &after,
        &agg_before,
        &agg_after,
        DEFAULT_DEADBAND,
    );

    println!("{scenario_file}:");
    println!(
        "  aggregate pg {:.3} -> {:.3}",
        finding.aggregate_before, finding.aggregate_after
    );
    for s in &finding.segments {
        println!(
            "  {:<28} pg {:.3} -> {:.3}   weight {:>6.1} -> {:>6.1} chip-s",
            s.segment, s.before, s.after, s.weight_before, s.weight_after
        );
    }
    println!(
        "  mix-shift flag: {}",
        if finding.flagged {
            "RAISED"
        } else {
            "not raised"
        }
    );
    println!();
    Ok(())
}

fn main() -> fleetsim::Result<()> {
    check("simpson.toml")?;
    check("simpson_control.toml")
}
