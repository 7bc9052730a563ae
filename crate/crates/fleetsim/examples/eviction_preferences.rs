//! Scheduling goodput by job size under two eviction policies.
//!
//! The size-aware policy sacrifices medium jobs to place a large
//! arrival, keeping small and extra-large jobs near-perfect; the uniform
//! ablation evicts by chip count and hands the penalty to the smalls.
//!
//! ```sh
//! cargo run --example eviction_preferences
//! ```

use std::path::Path;

use fleetsim::analytics::segment_report;
use fleetsim::goodput::Dimension;
use fleetsim::{Analysis, Scenario};

fn sg_by_size(scenario_file: &str) -> fleetsim::Result<Vec<(String, f64)>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(scenario_file);
    let trace = fleetsim::run(Scenario::from_path(&path)?)?;
    let fleet = trace.header.scenario.as_ref().unwrap().build_fleet()?;
    let analysis = Analysis::from_trace(&trace)?;
    let rows = segment_report(
        &analysis,
        &fleet,
        analysis.full_window(),
        Dimension::SizeClass,
    );
    Ok(rows
        .into_iter()
        .map(|r| (r.scope.to_string(), r.sg.unwrap_or(f64::NAN)))
        .collect())
}

fn main() -> fleetsim::Result<()> {
    for (label, file) in [
        ("size-aware eviction", "eviction_preference.toml"),
        ("uniform eviction   ", "eviction_uniform.toml"),
    ] {
        println!("{label}:");
        for (segment, sg) in sg_by_size(file)? {
            println!("  {segment:<22} sg = {sg:.3}");
        }
    }
    Ok(())
}
