//! Scenario files: the only mutable input surface.
//!
//! A scenario is a TOML document declaring chip kinds, pods, op graphs,
//! jobs (with step profiles and runtime parameters), scheduler policy,
//! a compiler-pass schedule, the failure-model switch, horizon and seed.
//! Unknown keys are rejected; all cross-references must resolve.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fleet::{ChipKind, Fleet, MeshShape, Pod, SizeClass};
use crate::program::{actual_step_time, CompilerPass, OpGraph, StepProfile};
use crate::scheduler::{EvictionOrder, EvictionPolicy, JobRequest, Phase};
use crate::time::{secs_to_micros, Micros};

/// Per-job runtime-layer parameters. All times are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeParams {
    /// Chip init plus program load/compile, paid at the start of every
    /// incarnation.
    #[serde(default)]
    pub init_time: f64,
    /// The compile share of `init_time`, skipped on re-runs when
    /// `aot_compile` is set.
    #[serde(default)]
    pub compile_time: f64,
    /// Steps between checkpoints.
    #[serde(default = "default_checkpoint_interval")]
    pub checkpoint_interval: u64,
    /// Time to write one checkpoint.
    #[serde(default)]
    pub checkpoint_write_time: f64,
    /// When set, stepping continues during checkpoint writes and the
    /// commit lands `checkpoint_write_time` after the write begins.
    #[serde(default)]
    pub async_checkpoint: bool,
    /// Compile once on cheap hardware: repeat incarnations skip
    /// `compile_time`.
    #[serde(default)]
    pub aot_compile: bool,
    /// Checkpoint restore cost paid on every re-incarnation.
    #[serde(default)]
    pub restore_time: f64,
    /// Bulk inference only: number of weight shards.
    #[serde(default)]
    pub shards: Option<u64>,
    /// Bulk inference only: barrier wait per shard commit, seconds.
    #[serde(default)]
    pub shard_barrier_time: Option<f64>,
}

fn default_checkpoint_interval() -> u64 {
    1
}

impl Default for RuntimeParams {
    fn default() -> Self {
        RuntimeParams {
            init_time: 0.0,
            compile_time: 0.0,
            checkpoint_interval: 1,
            checkpoint_write_time: 0.0,
            async_checkpoint: false,
            aot_compile: false,
            restore_time: 0.0,
            shards: None,
            shard_barrier_time: None,
        }
    }
}

impl RuntimeParams {
    fn validate(&self, path: &str) -> Result<()> {
        for (field, v) in [
            ("init_time", self.init_time),
            ("compile_time", self.compile_time),
            ("checkpoint_write_time", self.checkpoint_write_time),
            ("restore_time", self.restore_time),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(
                    format!("{path}.{field}"),
                    "must be a finite value >= 0",
                ));
            }
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::config(
                format!("{path}.checkpoint_interval"),
                "must be >= 1",
            ));
        }
        if self.compile_time > self.init_time {
            return Err(Error::config(
                format!("{path}.compile_time"),
                "cannot exceed init_time",
            ));
        }
        if let Some(shards) = self.shards {
            if shards == 0 {
                return Err(Error::config(format!("{path}.shards"), "must be >= 1"));
            }
        }
        if let Some(barrier) = self.shard_barrier_time {
            if !barrier.is_finite() || barrier < 0.0 {
                return Err(Error::config(
                    format!("{path}.shard_barrier_time"),
                    "must be a finite value >= 0",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub id: String,
    #[serde(default)]
    pub priority: i64,
    pub chip_kind: String,
    pub shape: Vec<u32>,
    /// Submission time, seconds from scenario start.
    #[serde(default)]
    pub arrival: f64,
    /// Required productive step count (batches for serving, items for bulk
    /// inference).
    pub work: u64,
    #[serde(default = "default_phase")]
    pub phase: Phase,
    #[serde(default = "default_tag")]
    pub runtime_tag: String,
    #[serde(default = "default_tag")]
    pub framework_tag: String,
    /// Optional data-cell affinity.
    #[serde(default)]
    pub cell: Option<String>,
    /// Number of gang-scheduled tasks; chips divide evenly across tasks.
    #[serde(default = "default_tasks")]
    pub tasks: u32,
    /// Label of the op graph this job runs.
    pub graph: String,
    pub profile: StepProfile,
    #[serde(default)]
    pub runtime: RuntimeParams,
}

fn default_phase() -> Phase {
    Phase::Training
}

fn default_tag() -> String {
    "default".to_string()
}

fn default_tasks() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledPass {
    /// When the pass lands, seconds from scenario start.
    pub at: f64,
    /// Job id, or `*` for every job.
    #[serde(default = "default_pass_scope")]
    pub job: String,
    pub name: String,
    pub effect: crate::program::PassEffect,
}

fn default_pass_scope() -> String {
    "*".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSection {
    /// Ascending size-class boundaries; jobs of up to `t[0]` chips are
    /// small, up to `t[1]` medium, up to `t[2]` large, above that xl.
    #[serde(default)]
    pub size_thresholds: Option<[u64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSection {
    /// Either the string `"uniform"` or a four-element size-class list,
    /// most evictable first.
    #[serde(default)]
    pub eviction_preference: Option<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodSpec {
    pub id: String,
    pub chip_kind: String,
    pub shape: Vec<u32>,
    #[serde(default = "default_cell")]
    pub cell: String,
}

fn default_cell() -> String {
    "cell-0".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipKindSpec {
    pub name: String,
    pub peak_flops: f64,
    /// Mean time between failures per chip, seconds.
    pub mtbf: f64,
    #[serde(default = "default_generation")]
    pub generation: String,
}

fn default_generation() -> String {
    "gen-0".to_string()
}

/// The parsed scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Simulation horizon, seconds.
    pub horizon: f64,
    pub seed: u64,
    /// Failure-model switch; chip failures are sampled only when set.
    #[serde(default)]
    pub failures: bool,
    pub chip_kinds: Vec<ChipKindSpec>,
    pub pods: Vec<PodSpec>,
    #[serde(default)]
    pub fleet: Option<FleetSection>,
    #[serde(default)]
    pub scheduler: Option<SchedulerSection>,
    #[serde(default)]
    pub op_graphs: Vec<OpGraph>,
    pub jobs: Vec<JobSpec>,
    #[serde(default)]
    pub passes: Vec<ScheduledPass>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config {
            path: "<document>".to_string(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("horizon", "must be > 0"));
        }
        self.build_fleet()?;
        let mut graph_labels = BTreeSet::new();
        for graph in &self.op_graphs {
            graph.validate()?;
            if !graph_labels.insert(graph.label.as_str()) {
                return Err(Error::config(
                    format!("op_graphs[{}]", graph.label),
                    "duplicate graph label",
                ));
            }
        }
        let kind_names: BTreeSet<&str> = self.chip_kinds.iter().map(|k| k.name.as_str()).collect();
        let mut job_ids = BTreeSet::new();
        for (i, job) in self.jobs.iter().enumerate() {
            let path = |field: &str| format!("jobs[{i}].{field}");
            if !job_ids.insert(job.id.as_str()) {
                return Err(Error::config(path("id"), "duplicate job id"));
            }
            if job.id == "*" {
                return Err(Error::config(path("id"), "`*` is reserved"));
            }
            if !kind_names.contains(job.chip_kind.as_str()) {
                return Err(Error::config(
                    path("chip_kind"),
                    format!("unknown chip kind `{}`", job.chip_kind),
                ));
            }
            MeshShape::new(job.shape.clone())
                .map_err(|e| Error::config(path("shape"), e.to_string()))?;
            if job.work == 0 {
                return Err(Error::config(path("work"), "must be >= 1"));
            }
            if !(job.arrival.is_finite() && job.arrival >= 0.0) {
                return Err(Error::config(path("arrival"), "must be >= 0"));
            }
            if job.tasks == 0 {
                return Err(Error::config(path("tasks"), "must be >= 1"));
            }
            let chips = MeshShape::new(job.shape.clone()).unwrap().chip_count();
            if !chips.is_multiple_of(job.tasks as u64) {
                return Err(Error::config(
                    path("tasks"),
                    format!(
                        "{} chips do not divide evenly across {} tasks",
                        chips, job.tasks
                    ),
                ));
            }
            if !graph_labels.contains(job.graph.as_str()) {
                return Err(Error::config(
                    path("graph"),
                    format!("unknown op graph `{}`", job.graph),
                ));
            }
            job.profile.validate(&format!("jobs[{i}].profile"))?;
            let (step_time, _) = actual_step_time(&job.profile);
            if step_time <= 0.0 {
                return Err(Error::config(
                    format!("jobs[{i}].profile"),
                    "actual step time must be > 0",
                ));
            }
            job.runtime.validate(&format!("jobs[{i}].runtime"))?;
            if job.phase == Phase::BulkInference && job.runtime.shards.is_none() {
                return Err(Error::config(
                    format!("jobs[{i}].runtime.shards"),
                    "required for bulk_inference jobs",
                ));
            }
        }
        for (i, pass) in self.passes.iter().enumerate() {
            let path = format!("passes[{i}]");
            if !(pass.at.is_finite() && pass.at >= 0.0) {
                return Err(Error::config(format!("{path}.at"), "must be >= 0"));
            }
            if pass.job != "*" && !job_ids.contains(pass.job.as_str()) {
                return Err(Error::config(
                    format!("{path}.job"),
                    format!("unknown job `{}`", pass.job),
                ));
            }
            CompilerPass {
                name: pass.name.clone(),
                effect: pass.effect.clone(),
            }
            .validate(&path)?;
        }
        self.eviction_policy()?;
        Ok(())
    }

    pub fn build_fleet(&self) -> Result<Fleet> {
        let kinds = self
            .chip_kinds
            .iter()
            .map(|k| ChipKind {
                name: k.name.clone(),
                peak_flops: k.peak_flops,
                mtbf: k.mtbf,
                generation_tag: k.generation.clone(),
            })
            .collect();
        let pods = self
            .pods
            .iter()
            .map(|p| Pod {
                id: p.id.clone(),
                chip_kind: p.chip_kind.clone(),
                shape: MeshShape {
                    dims: p.shape.clone(),
                },
                cell: p.cell.clone(),
            })
            .collect();
        let thresholds = self.fleet.as_ref().and_then(|f| f.size_thresholds);
        Fleet::build(kinds, pods, thresholds)
    }

    pub fn eviction_policy(&self) -> Result<EvictionPolicy> {
        let Some(section) = &self.scheduler else {
            return Ok(EvictionPolicy::default());
        };
        let Some(value) = &section.eviction_preference else {
            return Ok(EvictionPolicy::default());
        };
        let path = "scheduler.eviction_preference";
        let policy = match value {
            toml::Value::String(s) if s == "uniform" => EvictionPolicy {
                order: EvictionOrder::Uniform,
            },
            toml::Value::Array(items) => {
                let mut classes = Vec::new();
                for item in items {
                    let name = item
                        .as_str()
                        .ok_or_else(|| Error::config(path, "entries must be size-class names"))?;
                    let class = match name {
                        "small" => SizeClass::Small,
                        "medium" => SizeClass::Medium,
                        "large" => SizeClass::Large,
                        "xl" => SizeClass::Xl,
                        other => {
                            return Err(Error::config(
                                path,
                                format!("unknown size class `{other}`"),
                            ))
                        }
                    };
                    classes.push(class);
                }
                let order: [SizeClass; 4] = classes
                    .try_into()
                    .map_err(|_| Error::config(path, "must list all four size classes"))?;
                EvictionPolicy {
                    order: EvictionOrder::Sized(order),
                }
            }
            _ => {
                return Err(Error::config(
                    path,
                    "expected `uniform` or a size-class list",
                ))
            }
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn horizon_micros(&self) -> Micros {
        secs_to_micros(self.horizon)
    }

    pub fn graph(&self, label: &str) -> Option<&OpGraph> {
        self.op_graphs.iter().find(|g| g.label == label)
    }

    pub fn job(&self, id: &str) -> Option<&JobSpec> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn job_request(&self, job: &JobSpec) -> JobRequest {
        JobRequest {
            job_id: job.id.clone(),
            priority: job.priority,
            chip_kind: job.chip_kind.clone(),
            shape: MeshShape {
                dims: job.shape.clone(),
            },
            arrival: secs_to_micros(job.arrival),
            work: job.work,
            phase: job.phase,
            runtime_tag: job.runtime_tag.clone(),
            framework_tag: job.framework_tag.clone(),
            cell: job.cell.clone(),
        }
    }

    /// Canonical JSON serialization; the preimage of the scenario hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Read a scenario field addressed by a dotted path with optional
    /// indices, e.g. `jobs[0].runtime.checkpoint_interval`.
    pub fn get_param(&self, path: &str) -> Result<serde_json::Value> {
        let doc = serde_json::to_value(self).expect("scenario serializes");
        lookup(&doc, path)
            .cloned()
            .ok_or_else(|| Error::config(path, "no such scenario field"))
    }

    /// Return a copy of the scenario with the addressed field replaced.
    /// The result is re-validated.
    pub fn with_param(&self, path: &str, value: serde_json::Value) -> Result<Scenario> {
        let mut doc = serde_json::to_value(self).expect("scenario serializes");
        let slot = lookup_mut(&mut doc, path)
            .ok_or_else(|| Error::config(path, "no such scenario field"))?;
        if std::mem::discriminant(slot) != std::mem::discriminant(&value)
            && !(slot.is_number() && value.is_number())
        {
            return Err(Error::config(
                path,
                format!("type mismatch: field holds {slot}, got {value}"),
            ));
        }
        *slot = value;
        let scenario: Scenario = serde_json::from_value(doc).map_err(|e| Error::Config {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }
}

fn split_path(path: &str) -> Vec<String> {
    let mut parts = Vec::new();
    for segment in path.split('.') {
        let mut rest = segment;
        while let Some(open) = rest.find('[') {
            if open > 0 {
                parts.push(rest[..open].to_string());
            }
            let close = match rest.find(']') {
                Some(c) => c,
                None => {
                    parts.push(rest.to_string());
                    rest = "";
                    break;
                }
            };
            parts.push(rest[open..=close].to_string());
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            parts.push(rest.to_string());
        }
    }
    parts
}

fn lookup<'a>(doc: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    let mut cur = doc;
    for part in split_path(path) {
        if let Some(idx) = part.strip_prefix('[').and_then(|p| p.strip_suffix(']')) {
            cur = cur.get(idx.parse::<usize>().ok()?)?;
        } else {
            cur = cur.get(&part)?;
        }
    }
    Some(cur)
}

fn lookup_mut<'a>(doc: &'a mut serde_json::Value, path: &str) -> Option<&'a mut serde_json::Value> {
    let mut cur = doc;
    for part in split_path(path) {
        if let Some(idx) = part.strip_prefix('[').and_then(|p| p.strip_suffix(']')) {
            cur = cur.get_mut(idx.parse::<usize>().ok()?)?;
        } else {
            cur = cur.get_mut(&part)?;
        }
    }
    Some(cur)
}
