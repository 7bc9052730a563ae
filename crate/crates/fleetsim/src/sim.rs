//! Deterministic discrete-event engine driving job lifecycles.
//!
//! One event loop per run. All randomness comes from counter-based
//! per-chip streams keyed by (seed, pod, chip), so failure times do not
//! depend on event-processing order and survive scheduler changes.
//! Simultaneous events are ordered by a fixed kind priority, then job id,
//! then schedule order, which keeps traces byte-stable.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::program::{actual_step_time, apply_pass, flop_count, CompilerPass, StepProfile};
use crate::scenario::{JobSpec, Scenario};
use crate::scheduler::{schedule_tick, Allocation, EvictionPolicy, JobRequest, LiveJob, Phase};
use crate::time::{secs_to_micros, Micros};
use crate::trace::{Event, EventKind, JobMeta, Trace, TraceHeader, TRACE_FORMAT};

/// How a job's executed work becomes durable.
#[derive(Debug, Clone, PartialEq)]
pub enum CommitModel {
    /// Checkpoint every `interval` steps; synchronous writes stall
    /// stepping, asynchronous ones commit `write_us` after they begin.
    Checkpointed {
        interval: u64,
        write_us: Micros,
        async_write: bool,
    },
    /// Every completed batch is durable; preemption loses only the batch
    /// in flight.
    Continuous,
    /// Commit per weight shard behind a synchronous barrier wait.
    ShardBarrier { shard_size: u64, barrier_us: Micros },
}

/// Commit rule for serving and bulk-inference phases.
///
/// Training jobs commit through checkpoints and are rejected here.
pub fn serving_commit_model(job: &JobSpec) -> Result<CommitModel> {
    match job.phase {
        Phase::Training => Err(Error::config(
            format!("jobs[{}].phase", job.id),
            "serving commit model requires a serving or bulk_inference job",
        )),
        Phase::Serving => Ok(CommitModel::Continuous),
        Phase::BulkInference => {
            let shards = job.runtime.shards.unwrap_or(1).max(1);
            let shard_size = job.work.div_ceil(shards).max(1);
            Ok(CommitModel::ShardBarrier {
                shard_size,
                barrier_us: secs_to_micros(job.runtime.shard_barrier_time.unwrap_or(0.0)),
            })
        }
    }
}

fn commit_model(job: &JobSpec) -> CommitModel {
    match job.phase {
        Phase::Training => CommitModel::Checkpointed {
            interval: job.runtime.checkpoint_interval,
            write_us: secs_to_micros(job.runtime.checkpoint_write_time),
            async_write: job.runtime.async_checkpoint,
        },
        _ => serving_commit_model(job).expect("non-training phase"),
    }
}

/// Failure times for one chip stream over the horizon, exponential
/// inter-arrivals with mean `mtbf_secs`.
pub fn chip_failure_times(
    seed: u64,
    stream: &str,
    mtbf_secs: f64,
    horizon_us: Micros,
) -> Vec<Micros> {
    if !mtbf_secs.is_finite() || mtbf_secs <= 0.0 {
        return Vec::new();
    }
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stream.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    let exp = Exp::new(1.0 / mtbf_secs).expect("positive rate");
    let mut times = Vec::new();
    let mut t_secs = 0.0f64;
    loop {
        t_secs += exp.sample(&mut rng);
        let t_us = (t_secs * 1e6).round() as u128;
        if t_us > horizon_us as u128 {
            return times;
        }
        times.push(t_us as Micros);
    }
}

/// Failure times across `chips` identical chips, as (chip index, time)
/// pairs sorted by time. Reproducible for a given seed; an infinite or
/// non-positive mtbf disables the model.
pub fn inject_failures(
    seed: u64,
    chips: u64,
    mtbf_secs: f64,
    horizon_us: Micros,
) -> Vec<(u64, Micros)> {
    let mut out = Vec::new();
    for chip in 0..chips {
        for t in chip_failure_times(seed, &format!("chip/{chip}"), mtbf_secs, horizon_us) {
            out.push((chip, t));
        }
    }
    out.sort_by_key(|&(chip, t)| (t, chip));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    PassApply { index: usize },
    Failure,
    InitDone,
    RestoreDone,
    StepEnd { idx: u64, start: Micros },
    CheckpointDone { upto: u64 },
    AsyncCommit { upto: u64 },
    Arrival,
}

impl TokenKind {
    fn priority(&self) -> u8 {
        match self {
            TokenKind::PassApply { .. } => 0,
            TokenKind::Failure => 1,
            TokenKind::InitDone
            | TokenKind::RestoreDone
            | TokenKind::StepEnd { .. }
            | TokenKind::CheckpointDone { .. } => 2,
            TokenKind::AsyncCommit { .. } => 3,
            TokenKind::Arrival => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    t: Micros,
    prio: u8,
    /// Job id, or pod/chip key for failures; the ε-ordering tie-break.
    key: String,
    seq: u64,
    kind: TokenKind,
    /// Job lifecycle epoch the token belongs to; stale tokens are ignored.
    epoch: u64,
}

impl Ord for Token {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.t, self.prio, &self.key, self.seq).cmp(&(other.t, other.prio, &other.key, other.seq))
    }
}

impl PartialOrd for Token {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JobPhaseState {
    NotArrived,
    Pending,
    Initializing,
    Restoring,
    Running,
    Checkpointing,
    Done,
    Unschedulable,
}

struct JobState {
    spec: JobSpec,
    request: JobRequest,
    profile: StepProfile,
    model: CommitModel,
    flops: u64,
    state: JobPhaseState,
    alloc: Option<Allocation>,
    /// Durable (checkpointed) step count.
    committed: u64,
    /// Progress index of the last step executed in the current incarnation.
    progress: u64,
    /// Allocation count; 1-based once first placed.
    incarnation: u32,
    /// Bumped on every allocation and teardown; stale-token guard.
    epoch: u64,
}

impl JobState {
    fn chips(&self) -> u64 {
        self.request.chip_count()
    }

    fn task_chips(&self) -> u64 {
        self.chips() / self.spec.tasks as u64
    }
}

enum Teardown {
    Failure { pod: String, coord: Vec<u32> },
    Preemption { by: String },
    Completion,
}

struct Engine {
    scenario: Scenario,
    fleet: crate::fleet::Fleet,
    policy: EvictionPolicy,
    horizon: Micros,
    now: Micros,
    queue: BinaryHeap<Reverse<Token>>,
    token_seq: u64,
    jobs: BTreeMap<String, JobState>,
    events: Vec<Event>,
    event_seq: u64,
    dirty: bool,
}

impl Engine {
    fn new(scenario: Scenario) -> Result<Engine> {
        scenario.validate()?;
        let fleet = scenario.build_fleet()?;
        let policy = scenario.eviction_policy()?;
        let horizon = scenario.horizon_micros();
        let mut jobs = BTreeMap::new();
        for spec in &scenario.jobs {
            let graph = scenario.graph(&spec.graph).expect("validated");
            let flops = flop_count(graph)?;
            jobs.insert(
                spec.id.clone(),
                JobState {
                    request: scenario.job_request(spec),
                    profile: spec.profile.clone(),
                    model: commit_model(spec),
                    flops,
                    state: JobPhaseState::NotArrived,
                    alloc: None,
                    committed: 0,
                    progress: 0,
                    incarnation: 0,
                    epoch: 0,
                    spec: spec.clone(),
                },
            );
        }
        Ok(Engine {
            scenario,
            fleet,
            policy,
            horizon,
            now: 0,
            queue: BinaryHeap::new(),
            token_seq: 0,
            jobs,
            events: Vec::new(),
            event_seq: 0,
            dirty: false,
        })
    }

    fn push(&mut self, t: Micros, key: String, kind: TokenKind, epoch: u64) {
        let token = Token {
            t,
            prio: kind.priority(),
            key,
            seq: self.token_seq,
            kind,
            epoch,
        };
        self.token_seq += 1;
        self.queue.push(Reverse(token));
    }

    fn emit(&mut self, mut event: Event) {
        event.t_us = self.now;
        event.seq = self.event_seq;
        self.event_seq += 1;
        self.events.push(event);
    }

    fn event(&self, kind: EventKind, job: &str, chips: u64) -> Event {
        Event::new(self.now, 0, kind, job, chips)
    }

    fn seed_tokens(&mut self) {
        let specs: Vec<(String, Micros)> = self
            .jobs
            .values()
            .map(|j| (j.spec.id.clone(), j.request.arrival))
            .collect();
        for (id, arrival) in specs {
            self.push(arrival, id.clone(), TokenKind::Arrival, 0);
        }
        let passes: Vec<(usize, Micros)> = self
            .scenario
            .passes
            .iter()
            .enumerate()
            .map(|(i, p)| (i, secs_to_micros(p.at)))
            .collect();
        for (index, at) in passes {
            self.push(
                at,
                format!("pass/{index}"),
                TokenKind::PassApply { index },
                0,
            );
        }
        if self.scenario.failures {
            let mut failures: Vec<(Micros, String)> = Vec::new();
            for pod in &self.fleet.pods {
                let mtbf = self
                    .fleet
                    .chip_kind(&pod.chip_kind)
                    .expect("validated")
                    .mtbf;
                for chip in 0..pod.chip_count() {
                    let stream = format!("{}/{}", pod.id, chip);
                    for t in chip_failure_times(self.scenario.seed, &stream, mtbf, self.horizon) {
                        failures.push((t, stream.clone()));
                    }
                }
            }
            for (t, stream) in failures {
                self.push(t, stream, TokenKind::Failure, 0);
            }
        }
    }

    fn run(mut self) -> Trace {
        self.seed_tokens();
        loop {
            let due_now = self
                .queue
                .peek()
                .map(|Reverse(t)| t.t <= self.horizon)
                .unwrap_or(false);
            if !due_now {
                if self.dirty {
                    // nothing left to process: a final pass cannot change
                    // completed history, but keep placements consistent
                    self.schedule_pass();
                }
                break;
            }
            let Reverse(token) = self.queue.pop().unwrap();
            self.now = token.t;
            self.process(token);
            let instant_over = self
                .queue
                .peek()
                .map(|Reverse(t)| t.t > self.now)
                .unwrap_or(true);
            if instant_over && self.dirty {
                self.dirty = false;
                self.schedule_pass();
            }
        }
        self.finalize_horizon();
        let hash = self.scenario.hash();
        Trace {
            header: TraceHeader {
                format: TRACE_FORMAT.to_string(),
                scenario_hash: hash,
                seed: self.scenario.seed,
                horizon_us: self.horizon,
                scenario: Some(self.scenario.clone()),
            },
            events: self.events,
        }
    }

    fn process(&mut self, token: Token) {
        match token.kind {
            TokenKind::Arrival => self.on_arrival(&token.key),
            TokenKind::PassApply { index } => self.on_pass(index),
            TokenKind::Failure => self.on_failure(&token.key),
            TokenKind::InitDone => self.on_init_done(&token.key, token.epoch),
            TokenKind::RestoreDone => self.on_restore_done(&token.key, token.epoch),
            TokenKind::StepEnd { idx, start } => {
                self.on_step_end(&token.key, token.epoch, idx, start)
            }
            TokenKind::CheckpointDone { upto } => {
                self.on_checkpoint_done(&token.key, token.epoch, upto)
            }
            TokenKind::AsyncCommit { upto } => self.on_async_commit(&token.key, token.epoch, upto),
        }
    }

    fn on_arrival(&mut self, job_id: &str) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        job.state = JobPhaseState::Pending;
        let chips = job.chips();
        let meta = JobMeta {
            chip_kind: job.spec.chip_kind.clone(),
            generation: self
                .fleet
                .chip_kind(&job.spec.chip_kind)
                .expect("validated")
                .generation_tag
                .clone(),
            phase: job.spec.phase,
            runtime_tag: job.spec.runtime_tag.clone(),
            framework_tag: job.spec.framework_tag.clone(),
            priority: job.spec.priority,
            shape: job.spec.shape.clone(),
            tasks: job.spec.tasks,
            work: job.spec.work,
            flops: job.flops,
            peak_flops: self
                .fleet
                .chip_kind(&job.spec.chip_kind)
                .expect("validated")
                .peak_flops,
        };
        let mut e = self.event(EventKind::JobSubmitted, job_id, chips);
        e.meta = Some(meta);
        self.emit(e);
        self.dirty = true;
    }

    fn on_pass(&mut self, index: usize) {
        let pass = self.scenario.passes[index].clone();
        let compiler_pass = CompilerPass {
            name: pass.name.clone(),
            effect: pass.effect.clone(),
        };
        let ids: Vec<String> = self
            .jobs
            .keys()
            .filter(|id| pass.job == "*" || pass.job == **id)
            .cloned()
            .collect();
        for id in ids {
            let job = self.jobs.get_mut(&id).expect("known job");
            job.profile = apply_pass(&job.profile, &compiler_pass);
        }
    }

    fn on_failure(&mut self, stream: &str) {
        let (pod_id, chip) = stream.split_once('/').expect("pod/chip stream key");
        let chip: u64 = chip.parse().expect("chip index");
        let pod = self.fleet.pod(pod_id).expect("known pod").clone();
        let victim = self.jobs.values().find_map(|j| {
            let alloc = j.alloc.as_ref()?;
            if alloc.pod_id == pod_id
                && alloc
                    .linear_chips(&pod.shape.dims)
                    .contains(&(chip as usize))
            {
                Some(j.spec.id.clone())
            } else {
                None
            }
        });
        if let Some(job_id) = victim {
            let coord = unflatten(chip, &pod.shape.dims);
            self.teardown(
                &job_id,
                Teardown::Failure {
                    pod: pod_id.to_string(),
                    coord,
                },
            );
        }
    }

    fn on_init_done(&mut self, job_id: &str, epoch: u64) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        if job.epoch != epoch || job.state != JobPhaseState::Initializing {
            return;
        }
        if job.incarnation >= 2 {
            job.state = JobPhaseState::Restoring;
            let chips = job.chips();
            let restore = secs_to_micros(job.spec.runtime.restore_time);
            let due = self.now + restore;
            let e = self.event(EventKind::RestoreBegin, job_id, chips);
            self.emit(e);
            self.push(due, job_id.to_string(), TokenKind::RestoreDone, epoch);
        } else {
            self.start_stepping(job_id, epoch);
        }
    }

    fn on_restore_done(&mut self, job_id: &str, epoch: u64) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        if job.epoch != epoch || job.state != JobPhaseState::Restoring {
            return;
        }
        let chips = job.chips();
        let e = self.event(EventKind::RestoreEnd, job_id, chips);
        self.emit(e);
        self.start_stepping(job_id, epoch);
    }

    fn start_stepping(&mut self, job_id: &str, epoch: u64) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        job.state = JobPhaseState::Running;
        job.progress = job.committed;
        self.schedule_next_step(job_id, epoch);
    }

    fn schedule_next_step(&mut self, job_id: &str, epoch: u64) {
        let job = self.jobs.get(job_id).expect("known job");
        debug_assert!(job.progress < job.spec.work);
        let step_us = secs_to_micros(actual_step_time(&job.profile).0);
        let idx = job.progress + 1;
        self.push(
            self.now + step_us,
            job_id.to_string(),
            TokenKind::StepEnd {
                idx,
                start: self.now,
            },
            epoch,
        );
    }

    fn on_step_end(&mut self, job_id: &str, epoch: u64, idx: u64, start: Micros) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        if job.epoch != epoch || job.state != JobPhaseState::Running {
            return;
        }
        job.progress = idx;
        let chips = job.chips();
        let model = job.model.clone();
        let work = job.spec.work;
        let mut e = self.event(EventKind::StepCommitted, job_id, chips);
        e.step = Some(idx);
        e.start_us = Some(start);
        self.emit(e);

        match model {
            CommitModel::Continuous => {
                let job = self.jobs.get_mut(job_id).expect("known job");
                job.committed = idx;
                if idx == work {
                    self.complete(job_id);
                } else {
                    self.schedule_next_step(job_id, epoch);
                }
            }
            CommitModel::Checkpointed {
                interval,
                write_us,
                async_write,
            } => {
                let boundary = idx.is_multiple_of(interval);
                if boundary {
                    let mut e = self.event(EventKind::CheckpointBegin, job_id, chips);
                    e.upto = Some(idx);
                    e.async_write = Some(async_write);
                    self.emit(e);
                    if async_write {
                        self.push(
                            self.now + write_us,
                            job_id.to_string(),
                            TokenKind::AsyncCommit { upto: idx },
                            epoch,
                        );
                        if idx < work {
                            self.schedule_next_step(job_id, epoch);
                        }
                        // at idx == work the job waits for the in-flight
                        // commit; completion follows it
                    } else {
                        let job = self.jobs.get_mut(job_id).expect("known job");
                        job.state = JobPhaseState::Checkpointing;
                        self.push(
                            self.now + write_us,
                            job_id.to_string(),
                            TokenKind::CheckpointDone { upto: idx },
                            epoch,
                        );
                    }
                } else if idx == work {
                    // completion is a final checkpoint: residual steps
                    // commit at once
                    self.commit(job_id, work, None);
                    self.complete(job_id);
                } else {
                    self.schedule_next_step(job_id, epoch);
                }
            }
            CommitModel::ShardBarrier {
                shard_size,
                barrier_us,
            } => {
                let boundary = idx.is_multiple_of(shard_size) || idx == work;
                if boundary {
                    let mut e = self.event(EventKind::CheckpointBegin, job_id, chips);
                    e.upto = Some(idx);
                    e.async_write = Some(false);
                    self.emit(e);
                    let job = self.jobs.get_mut(job_id).expect("known job");
                    job.state = JobPhaseState::Checkpointing;
                    self.push(
                        self.now + barrier_us,
                        job_id.to_string(),
                        TokenKind::CheckpointDone { upto: idx },
                        epoch,
                    );
                } else {
                    self.schedule_next_step(job_id, epoch);
                }
            }
        }
    }

    fn commit(&mut self, job_id: &str, upto: u64, async_write: Option<bool>) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        debug_assert!(upto >= job.committed, "commit counts are non-decreasing");
        job.committed = upto;
        let chips = job.chips();
        let mut e = self.event(EventKind::CheckpointCommitted, job_id, chips);
        e.committed = Some(upto);
        e.async_write = async_write;
        self.emit(e);
    }

    fn on_checkpoint_done(&mut self, job_id: &str, epoch: u64, upto: u64) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        if job.epoch != epoch || job.state != JobPhaseState::Checkpointing {
            return;
        }
        self.commit(job_id, upto, Some(false));
        let job = self.jobs.get_mut(job_id).expect("known job");
        if job.committed == job.spec.work {
            self.complete(job_id);
        } else {
            job.state = JobPhaseState::Running;
            self.schedule_next_step(job_id, epoch);
        }
    }

    fn on_async_commit(&mut self, job_id: &str, epoch: u64, upto: u64) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        if job.epoch != epoch {
            return; // the incarnation that started this write is gone
        }
        if upto <= job.committed {
            return; // superseded by a later commit
        }
        self.commit(job_id, upto, Some(true));
        let job = self.jobs.get(job_id).expect("known job");
        if job.committed == job.spec.work {
            self.complete(job_id);
        }
    }

    fn complete(&mut self, job_id: &str) {
        self.teardown(job_id, Teardown::Completion);
    }

    fn teardown(&mut self, job_id: &str, reason: Teardown) {
        let job = self.jobs.get_mut(job_id).expect("known job");
        let chips = job.chips();
        let task_chips = job.task_chips();
        let tasks = job.spec.tasks;
        let committed = job.committed;
        debug_assert!(job.alloc.is_some(), "teardown requires an allocation");
        job.alloc = None;
        job.epoch += 1;
        job.state = match reason {
            Teardown::Completion => JobPhaseState::Done,
            _ => JobPhaseState::Pending,
        };
        match &reason {
            Teardown::Failure { pod, coord } => {
                log::debug!(
                    "t={} {job_id} lost to chip failure at {pod}/{coord:?}, committed {committed}",
                    self.now
                );
                let mut e = self.event(EventKind::Failure, job_id, chips);
                e.pod = Some(pod.clone());
                e.chip = Some(coord.clone());
                self.emit(e);
            }
            Teardown::Preemption { by } => {
                log::debug!("t={} {job_id} preempted by {by}, committed {committed}", self.now);
                let mut e = self.event(EventKind::Preemption, job_id, chips);
                e.by = Some(by.clone());
                self.emit(e);
            }
            Teardown::Completion => {
                log::debug!("t={} {job_id} completed with {committed} steps", self.now);
            }
        }
        let e = self.event(EventKind::AllUpEnd, job_id, chips);
        self.emit(e);
        for task in 0..tasks {
            let mut e = self.event(EventKind::TaskDown, job_id, task_chips);
            e.task = Some(task);
            self.emit(e);
        }
        if matches!(reason, Teardown::Completion) {
            let mut e = self.event(EventKind::JobCompleted, job_id, chips);
            e.committed = Some(committed);
            self.emit(e);
        }
        self.dirty = true;
    }

    fn schedule_pass(&mut self) {
        let pending: Vec<JobRequest> = self
            .jobs
            .values()
            .filter(|j| j.state == JobPhaseState::Pending)
            .map(|j| j.request.clone())
            .collect();
        if pending.is_empty() {
            return;
        }
        let live: BTreeMap<String, LiveJob> = self
            .jobs
            .values()
            .filter_map(|j| {
                j.alloc.as_ref().map(|alloc| {
                    (
                        j.spec.id.clone(),
                        LiveJob {
                            request: j.request.clone(),
                            alloc: alloc.clone(),
                        },
                    )
                })
            })
            .collect();
        let outcome = schedule_tick(&pending, &live, &self.fleet, self.now, &self.policy);
        for (victim, by) in &outcome.preemptions {
            self.teardown(victim, Teardown::Preemption { by: by.clone() });
        }
        for job_id in &outcome.unschedulable {
            let job = self.jobs.get_mut(job_id).expect("known job");
            job.state = JobPhaseState::Unschedulable;
            let chips = job.chips();
            let mut e = self.event(EventKind::Unschedulable, job_id, chips);
            e.reason = Some("shape exceeds every pod of its chip kind".to_string());
            self.emit(e);
        }
        for alloc in &outcome.placements {
            self.start_incarnation(alloc.clone());
        }
        self.dirty = false;
    }

    fn start_incarnation(&mut self, alloc: Allocation) {
        let job_id = alloc.job_id.clone();
        let job = self.jobs.get_mut(&job_id).expect("known job");
        debug_assert_eq!(job.state, JobPhaseState::Pending);
        job.incarnation += 1;
        job.epoch += 1;
        job.state = JobPhaseState::Initializing;
        job.alloc = Some(alloc.clone());
        let epoch = job.epoch;
        let chips = job.chips();
        let task_chips = job.task_chips();
        let tasks = job.spec.tasks;
        let incarnation = job.incarnation;
        let init_secs = if incarnation >= 2 && job.spec.runtime.aot_compile {
            job.spec.runtime.init_time - job.spec.runtime.compile_time
        } else {
            job.spec.runtime.init_time
        };
        log::debug!(
            "t={} {job_id} placed on {} at {:?} shape {:?} (incarnation {incarnation})",
            self.now,
            alloc.pod_id,
            alloc.origin,
            alloc.shape
        );
        let mut e = self.event(EventKind::TasksAllocated, &job_id, chips);
        e.pod = Some(alloc.pod_id.clone());
        e.origin = Some(alloc.origin.clone());
        e.shape = Some(alloc.shape.clone());
        e.incarnation = Some(incarnation);
        self.emit(e);
        for task in 0..tasks {
            let mut e = self.event(EventKind::TaskUp, &job_id, task_chips);
            e.task = Some(task);
            self.emit(e);
        }
        let e = self.event(EventKind::AllUpBegin, &job_id, chips);
        self.emit(e);
        self.push(
            self.now + secs_to_micros(init_secs),
            job_id,
            TokenKind::InitDone,
            epoch,
        );
    }

    /// Close still-open lifecycles at the horizon so every up interval
    /// has an end.
    fn finalize_horizon(&mut self) {
        self.now = self.horizon;
        let open: Vec<String> = self
            .jobs
            .values()
            .filter(|j| j.alloc.is_some())
            .map(|j| j.spec.id.clone())
            .collect();
        for job_id in open {
            let job = self.jobs.get_mut(&job_id).expect("known job");
            let chips = job.chips();
            let task_chips = job.task_chips();
            let tasks = job.spec.tasks;
            job.alloc = None;
            job.epoch += 1;
            let e = self.event(EventKind::AllUpEnd, &job_id, chips);
            self.emit(e);
            for task in 0..tasks {
                let mut e = self.event(EventKind::TaskDown, &job_id, task_chips);
                e.task = Some(task);
                e.reason = Some("horizon".to_string());
                self.emit(e);
            }
        }
    }
}

fn unflatten(linear: u64, dims: &[u32]) -> Vec<u32> {
    let mut coord = vec![0u32; dims.len()];
    let mut rem = linear;
    for axis in (0..dims.len()).rev() {
        coord[axis] = (rem % dims[axis] as u64) as u32;
        rem /= dims[axis] as u64;
    }
    coord
}

/// Run a scenario to a trace. Deterministic: identical scenarios yield
/// byte-identical traces.
pub fn run(scenario: Scenario) -> Result<Trace> {
    Ok(Engine::new(scenario)?.run())
}
