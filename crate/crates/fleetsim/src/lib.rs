//! Deterministic discrete-event simulation of an ML accelerator fleet,
//! plus a goodput analytics engine over the resulting traces.
//!
//! The metric at the center is a three-way decomposition of fleet
//! efficiency: scheduling goodput (allocated chip-time over capacity),
//! runtime goodput (checkpoint-committed chip-time over allocated), and
//! program goodput (roofline-ideal time over actual time). Their product
//! measures the fraction of fleet capacity converted into ideal-
//! roofline-equivalent productive work, and each factor isolates one
//! layer of the stack for optimization work.
//!
//! See the `examples/` directory for one runnable walkthrough per major
//! capability, and the bundled scenario corpus under `scenarios/`.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod fleet;
pub mod goodput;
pub mod program;
pub mod scenario;
pub mod scheduler;
pub mod sim;
pub mod time;
pub mod trace;

pub use error::{Error, Result};
pub use fleet::{ChipKind, Fleet, MeshShape, Pod, SizeClass};
pub use goodput::{Analysis, Dimension, GoodputReport, Scope, SegmentKey};
pub use program::{
    actual_step_time, apply_pass, flop_count, ideal_exec_time, program_goodput_of_step,
    Boundedness, CompilerPass, OpGraph, OpKind, OpNode, PassEffect, StepProfile,
};
pub use scenario::{JobSpec, RuntimeParams, Scenario};
pub use scheduler::{
    find_placement, fragmentation_score, schedule_tick, select_victims, Allocation, EvictionOrder,
    EvictionPolicy, JobRequest, LiveJob, Phase,
};
pub use sim::{inject_failures, run, serving_commit_model};
pub use time::{Interval, IntervalSet, Micros};
pub use trace::{Event, EventKind, JobMeta, Trace};
