//! Paired-run regression gate for a compiler change.
//!
//! Simulates the bundled device-bound pair (the only difference is the
//! per-step device compute time) and checks the observed goodput deltas
//! against the expected sign pattern for a step-time improvement.
//!
//! ```sh
//! cargo run --example compiler_comparison
//! ```

use std::path::Path;

use fleetsim::analytics::{compare_scenarios, DEFAULT_DEADBAND};
use fleetsim::Scenario;

fn main() -> fleetsim::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let base = fleetsim::run(Scenario::from_path(&dir.join("compiler_device_base.toml"))?)?;
    let opt = fleetsim::run(Scenario::from_path(&dir.join("compiler_device_opt.toml"))?)?;
    let verdict = compare_scenarios(
        &base,
        &opt,
        "jobs[0].profile.device_compute_time",
        DEFAULT_DEADBAND,
    )?;
    print!("{}", verdict.render());

    let host_base = fleetsim::run(Scenario::from_path(&dir.join("compiler_host_base.toml"))?)?;
    let host_opt = fleetsim::run(Scenario::from_path(&dir.join("compiler_host_opt.toml"))?)?;
    let verdict = compare_scenarios(
        &host_base,
        &host_opt,
        "jobs[0].profile.device_compute_time",
        DEFAULT_DEADBAND,
    )?;
    println!();
    println!("host-bound variant (the same change is invisible):");
    print!("{}", verdict.render());
    Ok(())
}
