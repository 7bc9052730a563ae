//! The ML program model.
//!
//! Ideal work is counted on the unoptimized op graph and never changes;
//! compiler passes act on the step-time profile only. That split is what
//! makes the program-efficiency metric insensitive to compiler decisions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fleet::ChipKind;

/// FLOP-counting conventions, applied per node kind:
/// matmul `2*M*K*N`, elementwise 1 per element, embedding lookup 2 per
/// looked-up element, collectives 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// dims: `[M, K, N]`
    Matmul,
    /// dims: `[element_count]`
    Elementwise,
    /// dims: `[lookups, dim]`
    EmbeddingLookup,
    /// dims: `[payload_bytes]`; contributes no FLOPs
    CollectiveComm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpNode {
    pub id: String,
    pub kind: OpKind,
    pub dims: Vec<u64>,
    #[serde(default)]
    pub predecessors: Vec<String>,
}

/// A DAG of tensor operations. Only its unoptimized form exists here;
/// there is no fusion or rewriting of graphs anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpGraph {
    pub label: String,
    pub nodes: Vec<OpNode>,
}

impl OpGraph {
    /// Validate id uniqueness, dimension arity/positivity, predecessor
    /// resolution, and acyclicity.
    pub fn validate(&self) -> Result<()> {
        let path = |i: usize, field: &str| format!("op_graphs[{}].nodes[{i}].{field}", self.label);
        let mut ids = BTreeSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if !ids.insert(node.id.as_str()) {
                return Err(Error::config(path(i, "id"), "duplicate node id"));
            }
            let arity = match node.kind {
                OpKind::Matmul => 3,
                OpKind::Elementwise => 1,
                OpKind::EmbeddingLookup => 2,
                OpKind::CollectiveComm => 1,
            };
            if node.dims.len() != arity {
                return Err(Error::config(
                    path(i, "dims"),
                    format!("expected {arity} dims, got {}", node.dims.len()),
                ));
            }
            if node.dims.contains(&0) {
                return Err(Error::config(path(i, "dims"), "dims must be positive"));
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            for pred in &node.predecessors {
                if !ids.contains(pred.as_str()) {
                    return Err(Error::config(
                        path(i, "predecessors"),
                        format!("unknown predecessor `{pred}`"),
                    ));
                }
            }
        }
        self.check_acyclic()?;
        Ok(())
    }

    fn check_acyclic(&self) -> Result<()> {
        // Kahn's algorithm over the predecessor lists.
        let index: std::collections::BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut successors: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            for pred in &node.predecessors {
                let p = index[pred.as_str()];
                indegree[i] += 1;
                successors[p].push(i);
            }
        }
        let mut queue: Vec<usize> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for &s in &successors[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    queue.push(s);
                }
            }
        }
        if seen != self.nodes.len() {
            return Err(Error::config(
                format!("op_graphs[{}]", self.label),
                "graph contains a cycle",
            ));
        }
        Ok(())
    }
}

const FLOP_LIMIT: u128 = i64::MAX as u128;

fn node_flops(node: &OpNode) -> Result<u128> {
    let f: u128 = match node.kind {
        OpKind::Matmul => {
            2u128 * node.dims[0] as u128 * node.dims[1] as u128 * node.dims[2] as u128
        }
        OpKind::Elementwise => node.dims[0] as u128,
        OpKind::EmbeddingLookup => 2u128 * node.dims[0] as u128 * node.dims[1] as u128,
        OpKind::CollectiveComm => 0,
    };
    if f > FLOP_LIMIT {
        return Err(Error::Overflow(format!(
            "flop count for node `{}` exceeds 2^63-1",
            node.id
        )));
    }
    Ok(f)
}

/// Total FLOPs of one step of the unoptimized graph.
pub fn flop_count(graph: &OpGraph) -> Result<u64> {
    let mut total: u128 = 0;
    for node in &graph.nodes {
        total += node_flops(node)?;
        if total > FLOP_LIMIT {
            return Err(Error::Overflow(format!(
                "total flop count for graph `{}` exceeds 2^63-1",
                graph.label
            )));
        }
    }
    Ok(total as u64)
}

/// Roofline-ideal execution time in seconds for `steps` steps on
/// `chip_count` chips of `chip_kind`.
pub fn ideal_exec_time(
    graph: &OpGraph,
    chip_kind: &ChipKind,
    chip_count: u64,
    steps: u64,
) -> Result<f64> {
    assert!(chip_count >= 1, "chip_count must be >= 1");
    let flops = flop_count(graph)?;
    Ok(steps as f64 * flops as f64 / (chip_kind.peak_flops * chip_count as f64))
}

/// Per-step execution profile. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    pub device_compute_time: f64,
    pub comm_time: f64,
    pub host_time: f64,
    /// Fraction of `comm_time` hidden under compute, in [0, 1].
    pub overlap_fraction: f64,
}

impl StepProfile {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (field, v) in [
            ("device_compute_time", self.device_compute_time),
            ("comm_time", self.comm_time),
            ("host_time", self.host_time),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(
                    format!("{path}.{field}"),
                    "must be a finite value >= 0",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return Err(Error::config(
                format!("{path}.overlap_fraction"),
                "must be in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Whether a step's duration is set by the accelerator path or the host path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundedness {
    DeviceBound,
    HostBound,
}

/// Actual step duration in seconds, plus the boundedness verdict.
///
/// The device path is compute plus the un-hidden share of communication;
/// the host path runs concurrently and wins whenever it is strictly longer.
pub fn actual_step_time(profile: &StepProfile) -> (f64, Boundedness) {
    let device_path =
        profile.device_compute_time + profile.comm_time * (1.0 - profile.overlap_fraction);
    if device_path >= profile.host_time {
        (device_path, Boundedness::DeviceBound)
    } else {
        (profile.host_time, Boundedness::HostBound)
    }
}

/// A parameterized optimization applied to a step profile. Passes never
/// touch the op graph, so ideal FLOP counts are invariant under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassEffect {
    /// Multiply device compute time by a factor in (0, 1].
    ScaleCompute(f64),
    /// Set the communication overlap fraction.
    SetOverlap(f64),
    /// Multiply host time by a factor in (0, 1].
    ScaleHost(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompilerPass {
    pub name: String,
    pub effect: PassEffect,
}

impl CompilerPass {
    pub fn validate(&self, path: &str) -> Result<()> {
        match self.effect {
            PassEffect::ScaleCompute(f) | PassEffect::ScaleHost(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::config(
                        format!("{path}.effect"),
                        "scale factor must be in (0, 1]",
                    ));
                }
            }
            PassEffect::SetOverlap(o) => {
                if !(0.0..=1.0).contains(&o) {
                    return Err(Error::config(
                        format!("{path}.effect"),
                        "overlap must be in [0, 1]",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Apply a pass, returning the transformed profile. Exactly one field
/// changes.
pub fn apply_pass(profile: &StepProfile, pass: &CompilerPass) -> StepProfile {
    let mut out = profile.clone();
    match pass.effect {
        PassEffect::ScaleCompute(f) => out.device_compute_time *= f,
        PassEffect::SetOverlap(o) => out.overlap_fraction = o,
        PassEffect::ScaleHost(f) => out.host_time *= f,
    }
    out
}

/// One step's program goodput: roofline-ideal time over actual time.
///
/// Values above 1 indicate a misconfigured model and are flagged, not
/// clamped. A zero-FLOP graph yields 0 with the `zero_flops` flag.
pub fn program_goodput_of_step(
    graph: &OpGraph,
    chip_kind: &ChipKind,
    chip_count: u64,
    profile: &StepProfile,
) -> Result<(f64, Vec<String>)> {
    let (actual, _) = actual_step_time(profile);
    if actual <= 0.0 {
        return Err(Error::UndefinedMetric(
            "program goodput with zero actual step time".into(),
        ));
    }
    let ideal = ideal_exec_time(graph, chip_kind, chip_count, 1)?;
    let pg = ideal / actual;
    let mut flags = Vec::new();
    if flop_count(graph)? == 0 {
        flags.push("zero_flops".to_string());
    }
    if pg > 1.0 {
        flags.push("pg_gt_1".to_string());
    }
    Ok((pg, flags))
}
