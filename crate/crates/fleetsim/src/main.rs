use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fleetsim::cli;

#[derive(Parser)]
#[command(
    name = "fleetsim",
    about = "Accelerator-fleet simulator and goodput analytics",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its event trace.
    Simulate {
        /// Scenario file (TOML).
        #[arg(short, long)]
        scenario: PathBuf,
        /// Output trace path (line-delimited JSON).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compute goodput reports from a trace.
    Analyze {
        /// Input trace path.
        #[arg(short, long)]
        trace: PathBuf,
        /// Analysis window as `start:end` seconds; defaults to the full
        /// horizon.
        #[arg(long)]
        window: Option<String>,
        /// Segment dimension: chip_kind, generation, size_class, phase,
        /// framework_tag, or runtime_tag.
        #[arg(long)]
        segment: Option<String>,
        /// Output CSV path.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compare two paired traces under a declared single-factor change.
    Compare {
        /// Baseline trace.
        #[arg(short = 'a', long = "trace-a")]
        trace_a: PathBuf,
        /// Candidate trace.
        #[arg(short = 'b', long = "trace-b")]
        trace_b: PathBuf,
        /// Scenario field that differs, e.g.
        /// `jobs[0].runtime.checkpoint_write_time`.
        #[arg(long)]
        factor: String,
        /// No-change band on metric deltas.
        #[arg(long)]
        deadband: Option<f64>,
    },
    /// Re-run a scenario over a list of values for one parameter.
    Sweep {
        /// Scenario file (TOML).
        #[arg(short, long)]
        scenario: PathBuf,
        /// Parameter path, e.g. `jobs[0].runtime.checkpoint_interval`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `1,5,20,100` or `false,true`.
        #[arg(long)]
        values: String,
        /// Output directory for traces and the summary CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    let code = match args.command {
        Command::Simulate { scenario, output } => cli::cmd_simulate(&scenario, &output),
        Command::Analyze {
            trace,
            window,
            segment,
            output,
        } => cli::cmd_analyze(&trace, window.as_deref(), segment.as_deref(), &output),
        Command::Compare {
            trace_a,
            trace_b,
            factor,
            deadband,
        } => cli::cmd_compare(&trace_a, &trace_b, &factor, deadband),
        Command::Sweep {
            scenario,
            param,
            values,
            output,
        } => cli::cmd_sweep(&scenario, &param, &values, &output),
    };
    ExitCode::from(code as u8)
}
