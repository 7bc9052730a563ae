//! Run the smallest bundled scenario end to end and print the fleet
//! goodput breakdown next to the legacy utilization metrics.
//!
//! ```sh
//! cargo run --example minimal_run
//! ```

use std::path::Path;

use fleetsim::goodput::Scope;
use fleetsim::{Analysis, Scenario};

fn main() -> fleetsim::Result<()> {
    let scenario_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/minimal.toml");
    let scenario = Scenario::from_path(&scenario_path)?;
    let trace = fleetsim::run(scenario)?;
    println!("events:");
    for event in &trace.events {
        println!(
            "  t={:>5.1}s seq={:<2} {:?} job={}",
            event.t_us as f64 / 1e6,
            event.seq,
            event.kind,
            event.job
        );
    }

    let fleet = trace.header.scenario.as_ref().unwrap().build_fleet()?;
    let analysis = Analysis::from_trace(&trace)?;
    let window = analysis.full_window();
    let report = analysis.report(&fleet, window, Scope::Fleet);
    println!();
    println!(
        "scheduling goodput: {:.4}  ({} / {} chip-s allocated vs capacity)",
        report.sg.unwrap(),
        report.sg_num,
        report.sg_den
    );
    println!(
        "runtime goodput:    {:.4}  ({} / {} chip-s committed vs allocated)",
        report.rg.unwrap(),
        report.rg_num,
        report.rg_den
    );
    println!(
        "program goodput:    {:.4}  (ideal {:.1} / actual {:.1} chip-s)",
        report.pg.unwrap(),
        report.pg_num,
        report.pg_den
    );
    println!("overall goodput:    {:.4}", report.mpg.unwrap());

    let legacy = analysis.legacy_metrics(&fleet, window)?;
    println!();
    println!(
        "legacy view: capacity {} chip-s, occupancy {:.4}, duty cycle {:.4}",
        legacy.capacity_chip_secs,
        legacy.occupancy,
        legacy.duty_cycle.unwrap()
    );
    Ok(())
}
