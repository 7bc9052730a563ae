//! Goodput decomposition over traces.
//!
//! Everything here is computed from the event log alone via exact
//! interval algebra: scheduling goodput (all tasks simultaneously up over
//! capacity), runtime goodput (checkpoint-committed stepping over
//! allocated), program goodput (roofline-ideal over actual step time for
//! committed work), their product, and the legacy utilization metrics
//! kept for contrast.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fleet::Fleet;
use crate::scheduler::Phase;
use crate::time::{chip_micros_to_chip_secs, ChipMicros, Interval, IntervalSet, Micros};
use crate::trace::{Event, EventKind, JobMeta, Trace};

/// Simultaneous uptime of all tasks: the intersection of the per-task up
/// interval sets.
pub fn all_allocated_intervals(per_task: &[IntervalSet]) -> IntervalSet {
    IntervalSet::intersect_all(per_task.iter())
}

/// One executed step's span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRec {
    pub idx: u64,
    pub start: Micros,
    pub end: Micros,
}

impl StepRec {
    fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }
}

/// Everything the metrics need to know about one job, replayed from the
/// trace.
#[derive(Debug, Clone)]
pub struct JobRecord {
    pub id: String,
    pub meta: JobMeta,
    pub chips: u64,
    pub submitted: Micros,
    pub completed: Option<Micros>,
    pub unschedulable: bool,
    /// Per-task (chips, up intervals).
    pub tasks: BTreeMap<u32, (u64, IntervalSet)>,
    /// Intersection of all tasks' up intervals.
    pub all_up: IntervalSet,
    /// Every executed step, committed or not.
    pub steps: Vec<StepRec>,
    /// Steps whose progress was saved (by checkpoint, completion, or the
    /// phase's commit convention).
    pub committed_steps: Vec<StepRec>,
    /// Final cumulative committed step count.
    pub committed: u64,
    /// Synchronous checkpoint/barrier write stalls (chips busy writing).
    pub sync_writes: IntervalSet,
}

impl JobRecord {
    /// Ideal roofline seconds per step on this job's allocation.
    pub fn ideal_step_secs(&self) -> f64 {
        self.meta.flops as f64 / (self.meta.peak_flops * self.chips as f64)
    }

    /// Demand window: submission to completion, or the horizon while
    /// unfinished.
    fn demand(&self, horizon: Micros) -> Interval {
        Interval::new(self.submitted, self.completed.unwrap_or(horizon))
    }
}

/// Scope selector for a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Fleet,
    Segment(SegmentKey),
    Job(String),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Fleet => write!(f, "fleet"),
            Scope::Segment(key) => write!(f, "{}={}", key.dimension.name(), key.value),
            Scope::Job(id) => write!(f, "job={id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dimension {
    ChipKind,
    Generation,
    SizeClass,
    Phase,
    FrameworkTag,
    RuntimeTag,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::ChipKind,
        Dimension::Generation,
        Dimension::SizeClass,
        Dimension::Phase,
        Dimension::FrameworkTag,
        Dimension::RuntimeTag,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Dimension::ChipKind => "chip_kind",
            Dimension::Generation => "generation",
            Dimension::SizeClass => "size_class",
            Dimension::Phase => "phase",
            Dimension::FrameworkTag => "framework_tag",
            Dimension::RuntimeTag => "runtime_tag",
        }
    }

    pub fn parse(name: &str) -> Result<Dimension> {
        Dimension::ALL
            .iter()
            .copied()
            .find(|d| d.name() == name)
            .ok_or_else(|| {
                Error::config("segment dimension", format!("unknown dimension `{name}`"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentKey {
    pub dimension: Dimension,
    pub value: String,
}

/// A computed goodput report. Undefined components are `None` with a
/// matching flag; numerators and denominators are chip-seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodputReport {
    pub scope: Scope,
    pub window: Interval,
    pub sg: Option<f64>,
    pub sg_num: f64,
    pub sg_den: f64,
    pub rg: Option<f64>,
    pub rg_num: f64,
    pub rg_den: f64,
    pub pg: Option<f64>,
    pub pg_num: f64,
    pub pg_den: f64,
    pub mpg: Option<f64>,
    pub flags: Vec<String>,
}

impl GoodputReport {
    pub const CSV_HEADER: &'static str = "scope,window_start_s,window_end_s,sg_num,sg_den,sg,rg_num,rg_den,rg,pg_num,pg_den,pg,mpg,flags";

    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scope,
            self.window.start as f64 / 1e6,
            self.window.end as f64 / 1e6,
            self.sg_num,
            self.sg_den,
            opt(self.sg),
            self.rg_num,
            self.rg_den,
            opt(self.rg),
            self.pg_num,
            self.pg_den,
            opt(self.pg),
            opt(self.mpg),
            self.flags.join(";"),
        )
    }
}

/// Legacy utilization metrics (for contrast with goodput).
#[derive(Debug, Clone, PartialEq)]
pub struct LegacyMetrics {
    pub capacity_chip_secs: f64,
    pub occupancy: f64,
    /// `None` when nothing was allocated in the window.
    pub duty_cycle: Option<f64>,
}

/// Parsed trace, ready for metric queries.
#[derive(Debug)]
pub struct Analysis {
    pub horizon: Micros,
    pub jobs: BTreeMap<String, JobRecord>,
}

/// mpg = sg x rg x pg, exactly as computed.
pub fn mpg(sg: f64, rg: f64, pg: f64) -> f64 {
    sg * rg * pg
}

struct PendingSteps {
    steps: Vec<StepRec>,
}

impl Analysis {
    pub fn from_trace(trace: &Trace) -> Result<Analysis> {
        let horizon = trace.header.horizon_us;
        let mut jobs: BTreeMap<String, JobRecord> = BTreeMap::new();
        // per-job transient state
        let mut open_task: BTreeMap<(String, u32), Micros> = BTreeMap::new();
        let mut pending: BTreeMap<String, PendingSteps> = BTreeMap::new();
        let mut open_sync: BTreeMap<String, Micros> = BTreeMap::new();

        let line = |e: &Event| e.seq + 2; // header occupies line 1

        for e in &trace.events {
            if e.kind == EventKind::JobSubmitted {
                let meta = e
                    .meta
                    .clone()
                    .ok_or_else(|| Error::corrupt(line(e), "job_submitted without job metadata"))?;
                if jobs.contains_key(&e.job) {
                    return Err(Error::corrupt(
                        line(e),
                        format!("duplicate job_submitted for `{}`", e.job),
                    ));
                }
                jobs.insert(
                    e.job.clone(),
                    JobRecord {
                        id: e.job.clone(),
                        meta,
                        chips: e.chips,
                        submitted: e.t_us,
                        completed: None,
                        unschedulable: false,
                        tasks: BTreeMap::new(),
                        all_up: IntervalSet::new(),
                        steps: Vec::new(),
                        committed_steps: Vec::new(),
                        committed: 0,
                        sync_writes: IntervalSet::new(),
                    },
                );
                pending.insert(e.job.clone(), PendingSteps { steps: Vec::new() });
                continue;
            }
            let job = jobs.get_mut(&e.job).ok_or_else(|| {
                Error::corrupt(line(e), format!("event for unknown job `{}`", e.job))
            })?;
            if job.completed.is_some() {
                return Err(Error::corrupt(
                    line(e),
                    format!("event for `{}` after its job_completed", e.job),
                ));
            }
            match e.kind {
                EventKind::JobSubmitted => unreachable!(),
                EventKind::TaskUp => {
                    let task = e
                        .task
                        .ok_or_else(|| Error::corrupt(line(e), "task_up without task index"))?;
                    let key = (e.job.clone(), task);
                    if open_task.contains_key(&key) {
                        return Err(Error::corrupt(
                            line(e),
                            format!("task {task} of `{}` already up", e.job),
                        ));
                    }
                    open_task.insert(key, e.t_us);
                    job.tasks
                        .entry(task)
                        .or_insert((e.chips, IntervalSet::new()));
                }
                EventKind::TaskDown => {
                    let task = e
                        .task
                        .ok_or_else(|| Error::corrupt(line(e), "task_down without task index"))?;
                    let key = (e.job.clone(), task);
                    let up_since = open_task.remove(&key).ok_or_else(|| {
                        Error::corrupt(
                            line(e),
                            format!("task {task} of `{}` down while not up", e.job),
                        )
                    })?;
                    job.tasks
                        .get_mut(&task)
                        .expect("task seen on the way up")
                        .1
                        .insert(up_since, e.t_us);
                }
                EventKind::StepCommitted => {
                    let rec = StepRec {
                        idx: e
                            .step
                            .ok_or_else(|| Error::corrupt(line(e), "step event without index"))?,
                        start: e.start_us.unwrap_or(e.t_us),
                        end: e.t_us,
                    };
                    job.steps.push(rec);
                    if job.meta.phase == Phase::Serving {
                        // serving batches are durable as they finish
                        job.committed_steps.push(rec);
                        job.committed = job.committed.max(rec.idx);
                    } else {
                        pending.get_mut(&e.job).expect("submitted").steps.push(rec);
                    }
                }
                EventKind::CheckpointBegin => {
                    if e.async_write == Some(false) {
                        open_sync.insert(e.job.clone(), e.t_us);
                    }
                }
                EventKind::CheckpointCommitted => {
                    let upto = e.committed.ok_or_else(|| {
                        Error::corrupt(line(e), "commit without cumulative count")
                    })?;
                    if upto < job.committed {
                        return Err(Error::corrupt(
                            line(e),
                            format!(
                                "commit count went backwards for `{}` ({} -> {upto})",
                                e.job, job.committed
                            ),
                        ));
                    }
                    job.committed = upto;
                    if let Some(begin) = open_sync.remove(&e.job) {
                        job.sync_writes.insert(begin, e.t_us);
                    }
                    let p = pending.get_mut(&e.job).expect("submitted");
                    let (saved, kept): (Vec<StepRec>, Vec<StepRec>) =
                        p.steps.drain(..).partition(|s| s.idx <= upto);
                    p.steps = kept;
                    job.committed_steps.extend(saved);
                }
                EventKind::Failure | EventKind::Preemption => {
                    // uncommitted work since the last checkpoint is lost
                    pending.get_mut(&e.job).expect("submitted").steps.clear();
                    if let Some(begin) = open_sync.remove(&e.job) {
                        job.sync_writes.insert(begin, e.t_us);
                    }
                }
                EventKind::JobCompleted => {
                    job.completed = Some(e.t_us);
                    if let Some(begin) = open_sync.remove(&e.job) {
                        job.sync_writes.insert(begin, e.t_us);
                    }
                }
                EventKind::Unschedulable => job.unschedulable = true,
                EventKind::TasksAllocated
                | EventKind::AllUpBegin
                | EventKind::AllUpEnd
                | EventKind::RestoreBegin
                | EventKind::RestoreEnd => {}
            }
        }
        // close intervals left open at the horizon
        for ((job_id, task), up_since) in open_task {
            let job = jobs.get_mut(&job_id).expect("submitted");
            job.tasks
                .get_mut(&task)
                .expect("task seen")
                .1
                .insert(up_since, horizon);
        }
        for (job_id, begin) in open_sync {
            jobs.get_mut(&job_id)
                .expect("submitted")
                .sync_writes
                .insert(begin, horizon);
        }
        for job in jobs.values_mut() {
            // a declared task that never came up keeps the gang from ever
            // being simultaneously available
            job.all_up = if (job.tasks.len() as u32) < job.meta.tasks {
                IntervalSet::new()
            } else {
                let sets: Vec<IntervalSet> =
                    job.tasks.values().map(|(_, set)| set.clone()).collect();
                all_allocated_intervals(&sets)
            };
            job.committed_steps.sort_by_key(|s| (s.start, s.idx));
            job.steps.sort_by_key(|s| (s.start, s.idx));
        }
        Ok(Analysis { horizon, jobs })
    }

    pub fn full_window(&self) -> Interval {
        Interval::new(0, self.horizon)
    }

    fn in_scope<'a>(&'a self, fleet: &Fleet, scope: &Scope) -> Vec<&'a JobRecord> {
        self.jobs
            .values()
            .filter(|j| match scope {
                Scope::Fleet => true,
                Scope::Job(id) => &j.id == id,
                Scope::Segment(key) => segment_value(j, fleet, key.dimension) == key.value,
            })
            .collect()
    }

    /// Allocated chip-time over capacity (fleet scope) or demanded
    /// chip-time (segment and job scopes).
    pub fn scheduling_goodput(
        &self,
        fleet: &Fleet,
        window: Interval,
        scope: &Scope,
    ) -> Result<(f64, ChipMicros, ChipMicros)> {
        let jobs = self.in_scope(fleet, scope);
        let num: ChipMicros = jobs
            .iter()
            .map(|j| j.chips as ChipMicros * j.all_up.overlap(window) as ChipMicros)
            .sum();
        let den: ChipMicros = match scope {
            Scope::Fleet => fleet.capacity(window),
            _ => jobs
                .iter()
                .map(|j| {
                    let demand = j.demand(self.horizon);
                    let overlap = demand.intersect(&window).map(|iv| iv.len()).unwrap_or(0);
                    j.chips as ChipMicros * overlap as ChipMicros
                })
                .sum(),
        };
        if den == 0 {
            return Err(Error::UndefinedMetric(format!(
                "scheduling goodput for {scope}: zero denominator"
            )));
        }
        Ok((num as f64 / den as f64, num, den))
    }

    /// Committed productive chip-time over allocated chip-time.
    pub fn runtime_goodput(
        &self,
        fleet: &Fleet,
        window: Interval,
        scope: &Scope,
    ) -> Result<(f64, ChipMicros, ChipMicros)> {
        let jobs = self.in_scope(fleet, scope);
        let num: ChipMicros = jobs
            .iter()
            .map(|j| j.chips as ChipMicros * committed_overlap(j, window) as ChipMicros)
            .sum();
        let (_, den_num, _) = self.scheduling_goodput(fleet, window, scope)?;
        if den_num == 0 {
            return Err(Error::UndefinedMetric(format!(
                "runtime goodput for {scope}: no allocated chip-time"
            )));
        }
        Ok((num as f64 / den_num as f64, num, den_num))
    }

    /// Roofline-ideal time over actual time for committed work,
    /// chip-weighted across the scope. Values are chip-seconds.
    pub fn program_goodput(
        &self,
        fleet: &Fleet,
        window: Interval,
        scope: &Scope,
    ) -> Result<(f64, f64, f64)> {
        let jobs = self.in_scope(fleet, scope);
        let mut num = 0.0f64;
        let mut den_us = 0.0f64;
        for job in jobs {
            let ideal = job.ideal_step_secs();
            for step in &job.committed_steps {
                let span = step.interval();
                let overlap = span.intersect(&window).map(|iv| iv.len()).unwrap_or(0);
                if overlap == 0 {
                    continue;
                }
                let frac = overlap as f64 / span.len().max(1) as f64;
                num += job.chips as f64 * ideal * frac;
                den_us += job.chips as f64 * overlap as f64;
            }
        }
        if den_us == 0.0 {
            return Err(Error::UndefinedMetric(format!(
                "program goodput for {scope}: no committed work in window"
            )));
        }
        let den = den_us / 1e6;
        Ok((num / den, num, den))
    }

    /// Capacity, occupancy and duty cycle over the window.
    pub fn legacy_metrics(&self, fleet: &Fleet, window: Interval) -> Result<LegacyMetrics> {
        let capacity = fleet.capacity(window);
        if capacity == 0 {
            return Err(Error::UndefinedMetric(
                "legacy metrics: zero capacity window".into(),
            ));
        }
        let mut occ_num: ChipMicros = 0;
        let mut busy_num: ChipMicros = 0;
        for job in self.jobs.values() {
            for (chips, up) in job.tasks.values() {
                occ_num += *chips as ChipMicros * up.overlap(window) as ChipMicros;
            }
            let stepping = IntervalSet::from_pairs(job.steps.iter().map(|s| (s.start, s.end)));
            let busy = stepping.union(&job.sync_writes);
            busy_num += job.chips as ChipMicros * busy.overlap(window) as ChipMicros;
        }
        let occupancy = occ_num as f64 / capacity as f64;
        let duty_cycle = if occ_num == 0 {
            None
        } else {
            Some(busy_num as f64 / occ_num as f64)
        };
        Ok(LegacyMetrics {
            capacity_chip_secs: chip_micros_to_chip_secs(capacity),
            occupancy,
            duty_cycle,
        })
    }

    /// Full report for a scope; undefined components become flags rather
    /// than errors.
    pub fn report(&self, fleet: &Fleet, window: Interval, scope: Scope) -> GoodputReport {
        let mut flags = Vec::new();
        let sg = self.scheduling_goodput(fleet, window, &scope);
        let rg = self.runtime_goodput(fleet, window, &scope);
        let pg = self.program_goodput(fleet, window, &scope);

        let (sg_v, sg_num, sg_den) = match sg {
            Ok((v, num, den)) => (Some(v), num, den),
            Err(_) => {
                flags.push("sg_undefined".to_string());
                (None, 0, 0)
            }
        };
        let (rg_v, rg_num, rg_den) = match rg {
            Ok((v, num, den)) => (Some(v), num, den),
            Err(_) => {
                flags.push("rg_undefined".to_string());
                (None, 0, 0)
            }
        };
        let (pg_v, pg_num, pg_den) = match pg {
            Ok((v, num, den)) => (Some(v), num, den),
            Err(_) => {
                flags.push("pg_undefined".to_string());
                (None, 0.0, 0.0)
            }
        };
        if let Some(v) = pg_v {
            if v > 1.0 {
                flags.push("pg_gt_1".to_string());
            }
        }
        if self
            .in_scope(fleet, &scope)
            .iter()
            .any(|j| j.meta.flops == 0 && !j.committed_steps.is_empty())
        {
            flags.push("zero_flops".to_string());
        }
        let mpg_v = match (sg_v, rg_v, pg_v) {
            (Some(s), Some(r), Some(p)) => Some(mpg(s, r, p)),
            _ => None,
        };
        GoodputReport {
            scope,
            window,
            sg: sg_v,
            sg_num: chip_micros_to_chip_secs(sg_num),
            sg_den: chip_micros_to_chip_secs(sg_den),
            rg: rg_v,
            rg_num: chip_micros_to_chip_secs(rg_num),
            rg_den: chip_micros_to_chip_secs(rg_den),
            pg: pg_v,
            pg_num,
            pg_den,
            mpg: mpg_v,
            flags,
        }
    }

    /// Values observed in the trace for a segmentation dimension.
    pub fn segment_values(&self, fleet: &Fleet, dimension: Dimension) -> Vec<String> {
        let mut values: Vec<String> = self
            .jobs
            .values()
            .map(|j| segment_value(j, fleet, dimension))
            .collect();
        values.sort();
        values.dedup();
        values
    }
}

pub fn segment_value(job: &JobRecord, fleet: &Fleet, dimension: Dimension) -> String {
    match dimension {
        Dimension::ChipKind => job.meta.chip_kind.clone(),
        Dimension::Generation => job.meta.generation.clone(),
        Dimension::SizeClass => fleet.classify_size(job.chips.max(1)).name().to_string(),
        Dimension::Phase => job.meta.phase.name().to_string(),
        Dimension::FrameworkTag => job.meta.framework_tag.clone(),
        Dimension::RuntimeTag => job.meta.runtime_tag.clone(),
    }
}

fn committed_overlap(job: &JobRecord, window: Interval) -> Micros {
    job.committed_steps
        .iter()
        .filter_map(|s| s.interval().intersect(&window))
        .map(|iv| iv.len())
        .sum()
}
