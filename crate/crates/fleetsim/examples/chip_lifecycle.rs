//! Program goodput over a new chip generation's early life.
//!
//! Workloads land on fresh hardware before the compiler has been tuned
//! for it; segmenting program goodput by generation shows the gap to
//! the mature generation closing as generation-specific passes roll out.
//!
//! ```sh
//! cargo run --example chip_lifecycle
//! ```

use std::path::Path;

use fleetsim::analytics::segment_report;
use fleetsim::goodput::Dimension;
use fleetsim::time::Interval;
use fleetsim::{Analysis, Scenario};

fn main() -> fleetsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/chip_lifecycle.toml");
    let trace = fleetsim::run(Scenario::from_path(&path)?)?;
    let fleet = trace.header.scenario.as_ref().unwrap().build_fleet()?;
    let analysis = Analysis::from_trace(&trace)?;

    let bucket = 60_000_000;
    println!("program goodput by hardware generation, 60 s buckets:");
    let mut start = 0;
    while start < analysis.horizon {
        let window = Interval::new(start, (start + bucket).min(analysis.horizon));
        print!(
            "  [{:>3.0}s, {:>3.0}s)",
            window.start as f64 / 1e6,
            window.end as f64 / 1e6
        );
        for report in segment_report(&analysis, &fleet, window, Dimension::Generation) {
            print!(
                "   {} pg={:.3}",
                report.scope,
                report.pg.unwrap_or(f64::NAN)
            );
        }
        println!();
        start += bucket;
    }
    Ok(())
}
