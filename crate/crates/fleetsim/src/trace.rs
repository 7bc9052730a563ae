//! The canonical event log of one simulation run.
//!
//! A trace is replay-closed: every metric in this crate is computable
//! from the trace alone. On disk it is line-delimited JSON, one event
//! per line, header line first; identical scenarios produce byte-
//! identical files.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::time::Micros;

pub const TRACE_FORMAT: &str = "fleetsim.trace.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    JobSubmitted,
    TasksAllocated,
    TaskUp,
    TaskDown,
    AllUpBegin,
    AllUpEnd,
    StepCommitted,
    CheckpointBegin,
    CheckpointCommitted,
    Failure,
    Preemption,
    RestoreBegin,
    RestoreEnd,
    JobCompleted,
    Unschedulable,
}

/// Job identity and demand, attached to `job_submitted` so analytics
/// never need the scenario to segment a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobMeta {
    pub chip_kind: String,
    pub generation: String,
    pub phase: crate::scheduler::Phase,
    pub runtime_tag: String,
    pub framework_tag: String,
    pub priority: i64,
    pub shape: Vec<u32>,
    pub tasks: u32,
    pub work: u64,
    /// Ideal FLOPs per step of the job's unoptimized op graph.
    pub flops: u64,
    /// Per-chip roofline constant of the job's chip kind.
    pub peak_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_us: Micros,
    /// Monotone sequence number; total order within a trace.
    pub seq: u64,
    pub kind: EventKind,
    pub job: String,
    /// Chip-count context: the job's chips, or the task's chips for
    /// per-task events.
    pub chips: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pod: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub origin: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shape: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub incarnation: Option<u32>,
    /// Step index for `step_committed`, 1-based job progress.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub step: Option<u64>,
    /// Execution start of the step ending at `t_us`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub start_us: Option<Micros>,
    /// Cumulative committed step count on `checkpoint_committed`;
    /// non-decreasing per job.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub committed: Option<u64>,
    /// Step count a starting checkpoint will cover.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub upto: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub async_write: Option<bool>,
    /// Preempting job id on `preemption`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub by: Option<String>,
    /// Failed chip coordinate on `failure`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chip: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta: Option<JobMeta>,
}

impl Event {
    pub fn new(t_us: Micros, seq: u64, kind: EventKind, job: &str, chips: u64) -> Self {
        Event {
            t_us,
            seq,
            kind,
            job: job.to_string(),
            chips,
            task: None,
            pod: None,
            origin: None,
            shape: None,
            incarnation: None,
            step: None,
            start_us: None,
            committed: None,
            upto: None,
            async_write: None,
            by: None,
            chip: None,
            reason: None,
            meta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub horizon_us: Micros,
    /// The full scenario, embedded so traces are self-describing and
    /// paired runs can be checked for single-factor differences.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scenario: Option<Scenario>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

impl Trace {
    /// Synthetic-trace constructor for tests and oracles.
    pub fn synthetic(horizon_us: Micros, events: Vec<Event>) -> Self {
        Trace {
            header: TraceHeader {
                format: TRACE_FORMAT.to_string(),
                scenario_hash: String::new(),
                seed: 0,
                horizon_us,
                scenario: None,
            },
            events,
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = serde_json::to_string(&self.header).expect("header serializes");
        writeln!(w, "{header}")?;
        for event in &self.events {
            let line = serde_json::to_string(event).expect("event serializes");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// The full on-disk text form.
    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("trace is utf-8")
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from(r: impl BufRead) -> Result<Trace> {
        let mut lines = r.lines();
        let header_line = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::corrupt(1, "empty trace file")),
        };
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::corrupt(1, format!("bad header: {e}")))?;
        if header.format != TRACE_FORMAT {
            return Err(Error::corrupt(
                1,
                format!("unknown trace format `{}`", header.format),
            ));
        }
        let mut events: Vec<Event> = Vec::new();
        let mut last_t = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i as u64 + 2;
            let line = line?;
            if line.trim().is_empty() {
                return Err(Error::corrupt(line_no, "blank line in event stream"));
            }
            let event: Event = serde_json::from_str(&line)
                .map_err(|e| Error::corrupt(line_no, format!("bad event: {e}")))?;
            // one event per line, so the sequence number is the line index
            if event.seq != i as u64 {
                return Err(Error::corrupt(
                    line_no,
                    format!("sequence gap: expected {i}, got {}", event.seq),
                ));
            }
            if event.t_us < last_t {
                return Err(Error::corrupt(line_no, "events out of time order"));
            }
            last_t = event.t_us;
            events.push(event);
        }
        Ok(Trace { header, events })
    }

    pub fn load(path: &std::path::Path) -> Result<Trace> {
        let file = std::fs::File::open(path)?;
        Trace::read_from(std::io::BufReader::new(file))
    }
}
