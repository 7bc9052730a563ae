//! Checkpoint-interval economics under failures.
//!
//! Writes cost time; so does re-running work lost to the last failure.
//! Sweeping the interval exposes the interior optimum between the two
//! wastes, and pairing sync against async checkpointing shows the write
//! stall disappearing.
//!
//! ```sh
//! cargo run --example checkpoint_tradeoff
//! ```

use std::path::Path;

use fleetsim::goodput::Scope;
use fleetsim::{Analysis, Scenario};

fn rg_for(scenario: Scenario) -> fleetsim::Result<f64> {
    let trace = fleetsim::run(scenario)?;
    let fleet = trace.header.scenario.as_ref().unwrap().build_fleet()?;
    let analysis = Analysis::from_trace(&trace)?;
    let (rg, ..) = analysis.runtime_goodput(&fleet, analysis.full_window(), &Scope::Fleet)?;
    Ok(rg)
}

fn main() -> fleetsim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/checkpoint_sweep.toml");
    let base = Scenario::from_path(&path)?;

    println!("runtime goodput vs checkpoint interval (failures on):");
    for interval in [1u64, 5, 20, 100] {
        let variant = base.with_param(
            "jobs[0].runtime.checkpoint_interval",
            serde_json::json!(interval),
        )?;
        let rg = rg_for(variant)?;
        println!(
            "  every {interval:>3} steps: rg = {rg:.4} {}",
            "#".repeat((rg * 40.0) as usize)
        );
    }

    println!();
    println!("sync vs async checkpointing at the same interval:");
    for async_write in [false, true] {
        let variant = base.with_param(
            "jobs[0].runtime.async_checkpoint",
            serde_json::json!(async_write),
        )?;
        let rg = rg_for(variant)?;
        let label = if async_write { "async" } else { "sync " };
        println!("  {label}: rg = {rg:.4}");
    }
    Ok(())
}
