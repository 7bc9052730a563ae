//! Topology-aware placement with priority- and size-aware preemption.
//!
//! Placement is an exhaustive search over axis permutations and lattice
//! offsets, made deterministic by fixed lexicographic tie-breaking; there
//! is no attempt at optimal packing. Defragmentation is passive: among
//! feasible placements the scheduler picks the one leaving the largest
//! contiguous free sub-mesh behind.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fleet::{Fleet, MeshShape, Pod, SizeClass};
use crate::time::Micros;

/// Workload lifecycle phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Training,
    Serving,
    BulkInference,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Training => "training",
            Phase::Serving => "serving",
            Phase::BulkInference => "bulk_inference",
        }
    }
}

/// A workload's resource demand and identity tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub job_id: String,
    /// Higher priority may preempt strictly lower.
    pub priority: i64,
    pub chip_kind: String,
    pub shape: MeshShape,
    pub arrival: Micros,
    /// Required productive step count.
    pub work: u64,
    pub phase: Phase,
    pub runtime_tag: String,
    pub framework_tag: String,
    /// Optional data-cell affinity, matched against `Pod::cell`.
    pub cell: Option<String>,
}

impl JobRequest {
    pub fn chip_count(&self) -> u64 {
        self.shape.chip_count()
    }

    fn matches_pod(&self, pod: &Pod) -> bool {
        pod.chip_kind == self.chip_kind && self.cell.as_ref().is_none_or(|c| c == &pod.cell)
    }
}

/// A job's hold on a sub-mesh of one pod.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub job_id: String,
    pub pod_id: String,
    /// Lattice offset per axis, padded to the pod's rank.
    pub origin: Vec<u32>,
    /// Oriented shape (an axis permutation of the request), padded to the
    /// pod's rank.
    pub shape: Vec<u32>,
    pub start: Micros,
}

impl Allocation {
    pub fn chip_count(&self) -> u64 {
        self.shape.iter().map(|&d| d as u64).product()
    }

    pub fn overlaps(&self, other: &Allocation) -> bool {
        if self.pod_id != other.pod_id {
            return false;
        }
        boxes_overlap(&self.origin, &self.shape, &other.origin, &other.shape)
    }

    /// All chip coordinates covered, as linear indices into the pod lattice.
    pub fn linear_chips(&self, pod_shape: &[u32]) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.chip_count() as usize);
        let rank = pod_shape.len();
        let mut idx = vec![0u32; rank];
        loop {
            let mut linear = 0usize;
            for a in 0..rank {
                linear = linear * pod_shape[a] as usize + (self.origin[a] + idx[a]) as usize;
            }
            out.push(linear);
            // odometer increment over the allocation's extents
            let mut axis = rank;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.shape[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
}

fn boxes_overlap(origin_a: &[u32], shape_a: &[u32], origin_b: &[u32], shape_b: &[u32]) -> bool {
    origin_a
        .iter()
        .zip(shape_a)
        .zip(origin_b.iter().zip(shape_b))
        .all(|((&oa, &sa), (&ob, &sb))| oa < ob + sb && ob < oa + sa)
}

/// Victim ordering for preemption. `Sized` ranks candidates by size class
/// (most evictable first); `Uniform` ignores size class entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionOrder {
    Sized([SizeClass; 4]),
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvictionPolicy {
    pub order: EvictionOrder,
}

impl Default for EvictionPolicy {
    fn default() -> Self {
        EvictionPolicy {
            order: EvictionOrder::Sized([
                SizeClass::Medium,
                SizeClass::Large,
                SizeClass::Small,
                SizeClass::Xl,
            ]),
        }
    }
}

impl EvictionPolicy {
    pub fn validate(&self) -> Result<()> {
        if let EvictionOrder::Sized(order) = &self.order {
            let mut seen = order.to_vec();
            seen.sort();
            seen.dedup();
            if seen.len() != 4 {
                return Err(crate::error::Error::config(
                    "scheduler.eviction_preference",
                    "size preference must be a permutation of all four classes",
                ));
            }
        }
        Ok(())
    }

    fn rank(&self, class: SizeClass) -> u8 {
        match &self.order {
            EvictionOrder::Sized(order) => order.iter().position(|&c| c == class).unwrap() as u8,
            EvictionOrder::Uniform => 0,
        }
    }
}

/// Distinct axis permutations of the request shape, padded to `rank`,
/// in lexicographic order.
pub fn orientations(shape: &MeshShape, rank: usize) -> Vec<Vec<u32>> {
    let dims = shape.padded(rank);
    let mut out: Vec<Vec<u32>> = match dims.len() {
        1 => vec![dims],
        2 => vec![vec![dims[0], dims[1]], vec![dims[1], dims[0]]],
        3 => {
            let (a, b, c) = (dims[0], dims[1], dims[2]);
            vec![
                vec![a, b, c],
                vec![a, c, b],
                vec![b, a, c],
                vec![b, c, a],
                vec![c, a, b],
                vec![c, b, a],
            ]
        }
        _ => unreachable!("mesh rank is 1-3"),
    };
    out.sort();
    out.dedup();
    out
}

fn offsets(pod_shape: &[u32], oriented: &[u32]) -> Vec<Vec<u32>> {
    let rank = pod_shape.len();
    let mut limits = Vec::with_capacity(rank);
    for a in 0..rank {
        if oriented[a] > pod_shape[a] {
            return Vec::new();
        }
        limits.push(pod_shape[a] - oriented[a]);
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; rank];
    loop {
        out.push(cur.clone());
        let mut axis = rank;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            cur[axis] += 1;
            if cur[axis] <= limits[axis] {
                break;
            }
            cur[axis] = 0;
        }
    }
}

fn conflict_free(pod: &Pod, live: &[&Allocation], origin: &[u32], oriented: &[u32]) -> bool {
    live.iter()
        .all(|a| a.pod_id != pod.id || !boxes_overlap(&a.origin, &a.shape, origin, oriented))
}

/// All conflict-free `(origin, oriented shape)` placements, in search order.
pub fn enumerate_placements(
    request: &JobRequest,
    pod: &Pod,
    live: &[&Allocation],
) -> Vec<(Vec<u32>, Vec<u32>)> {
    let rank = pod.shape.dims.len();
    if request.shape.dims.len() > rank {
        return Vec::new();
    }
    let mut out = Vec::new();
    for oriented in orientations(&request.shape, rank) {
        for origin in offsets(&pod.shape.dims, &oriented) {
            if conflict_free(pod, live, &origin, &oriented) {
                out.push((origin, oriented.clone()));
            }
        }
    }
    out
}

/// First conflict-free placement of `request` in `pod`, searching axis
/// permutations and lattice offsets in lexicographic order.
pub fn find_placement(
    request: &JobRequest,
    pod: &Pod,
    live: &[&Allocation],
) -> Option<(Vec<u32>, Vec<u32>)> {
    let rank = pod.shape.dims.len();
    if request.shape.dims.len() > rank {
        return None;
    }
    for oriented in orientations(&request.shape, rank) {
        for origin in offsets(&pod.shape.dims, &oriented) {
            if conflict_free(pod, live, &origin, &oriented) {
                return Some((origin, oriented));
            }
        }
    }
    None
}

/// 3-d prefix sums over the pod occupancy lattice, for O(1) box-emptiness
/// queries. `prefix[x][y][z]` counts occupied chips in `[0,x)x[0,y)x[0,z)`.
struct OccupancyGrid {
    dims: [usize; 3],
    prefix: Vec<i64>,
}

impl OccupancyGrid {
    fn new(pod_shape: &[u32], live: &[&Allocation], pod_id: &str) -> Self {
        let mut dims = [1usize; 3];
        for (i, &d) in pod_shape.iter().enumerate() {
            dims[i] = d as usize;
        }
        let mut occupied = vec![0i64; dims[0] * dims[1] * dims[2]];
        for alloc in live.iter().filter(|a| a.pod_id == pod_id) {
            let mut origin = [0usize; 3];
            let mut extent = [1usize; 3];
            for i in 0..alloc.origin.len() {
                origin[i] = alloc.origin[i] as usize;
                extent[i] = alloc.shape[i] as usize;
            }
            for x in origin[0]..origin[0] + extent[0] {
                for y in origin[1]..origin[1] + extent[1] {
                    for z in origin[2]..origin[2] + extent[2] {
                        occupied[(x * dims[1] + y) * dims[2] + z] = 1;
                    }
                }
            }
        }
        let (nx, ny, nz) = (dims[0], dims[1], dims[2]);
        let stride = [(ny + 1) * (nz + 1), nz + 1];
        let mut prefix = vec![0i64; (nx + 1) * (ny + 1) * (nz + 1)];
        for x in 1..=nx {
            for y in 1..=ny {
                for z in 1..=nz {
                    let at = |p: &[i64], a: usize, b: usize, c: usize| {
                        p[a * stride[0] + b * stride[1] + c]
                    };
                    let v = occupied[((x - 1) * ny + (y - 1)) * nz + (z - 1)]
                        + at(&prefix, x - 1, y, z)
                        + at(&prefix, x, y - 1, z)
                        + at(&prefix, x, y, z - 1)
                        - at(&prefix, x - 1, y - 1, z)
                        - at(&prefix, x - 1, y, z - 1)
                        - at(&prefix, x, y - 1, z - 1)
                        + at(&prefix, x - 1, y - 1, z - 1);
                    prefix[x * stride[0] + y * stride[1] + z] = v;
                }
            }
        }
        OccupancyGrid { dims, prefix }
    }

    fn occupied_in_box(&self, origin: [usize; 3], extent: [usize; 3]) -> u64 {
        let s = [(self.dims[1] + 1) * (self.dims[2] + 1), self.dims[2] + 1];
        let at = |a: usize, b: usize, c: usize| self.prefix[a * s[0] + b * s[1] + c];
        let (x0, y0, z0) = (origin[0], origin[1], origin[2]);
        let (x1, y1, z1) = (x0 + extent[0], y0 + extent[1], z0 + extent[2]);
        let v = at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0)
            + at(x0, y0, z1)
            + at(x0, y1, z0)
            + at(x1, y0, z0)
            - at(x0, y0, z0);
        v as u64
    }

    fn total_occupied(&self) -> u64 {
        self.occupied_in_box([0, 0, 0], self.dims)
    }

    /// Chip count of the largest fully-free axis-aligned box.
    fn largest_free_box(&self) -> u64 {
        let [nx, ny, nz] = self.dims;
        let mut shapes: Vec<(usize, usize, usize)> = Vec::new();
        for sx in 1..=nx {
            for sy in 1..=ny {
                for sz in 1..=nz {
                    shapes.push((sx, sy, sz));
                }
            }
        }
        shapes.sort_by_key(|&(a, b, c)| std::cmp::Reverse(a * b * c));
        for (sx, sy, sz) in shapes {
            for x in 0..=nx - sx {
                for y in 0..=ny - sy {
                    for z in 0..=nz - sz {
                        if self.occupied_in_box([x, y, z], [sx, sy, sz]) == 0 {
                            return (sx * sy * sz) as u64;
                        }
                    }
                }
            }
        }
        0
    }
}

/// `1 - largest_free_box / total_free`; 0 for a fully empty or fully
/// packed pod.
pub fn fragmentation_score(pod: &Pod, live: &[&Allocation]) -> f64 {
    let grid = OccupancyGrid::new(&pod.shape.dims, live, &pod.id);
    let total = pod.chip_count();
    let free = total - grid.total_occupied();
    if free == 0 {
        return 0.0;
    }
    let largest = grid.largest_free_box();
    1.0 - largest as f64 / free as f64
}

/// A running job as the scheduler sees it.
#[derive(Debug, Clone)]
pub struct LiveJob {
    pub request: JobRequest,
    pub alloc: Allocation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct VictimKey {
    rank: u8,
    chips: u64,
    /// Later start preferred, so invert.
    start_inverted: i128,
    job_id: String,
}

fn victim_key(policy: &EvictionPolicy, fleet: &Fleet, job: &LiveJob) -> VictimKey {
    VictimKey {
        rank: policy.rank(fleet.classify_size(job.request.chip_count())),
        chips: job.request.chip_count(),
        start_inverted: -(job.alloc.start as i128),
        job_id: job.request.job_id.clone(),
    }
}

/// Iterate k-combinations of `0..n` in lexicographic index order, calling
/// `visit` until it returns true (found).
fn combinations(n: usize, k: usize, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return false;
    }
    loop {
        if visit(&idx) {
            return true;
        }
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] < n - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Smallest set of strictly-lower-priority jobs whose removal admits a
/// placement for `request`; `None` when no such set exists.
///
/// Among equal-cardinality feasible sets the policy's size preference
/// decides, then smaller chip count, then later start time.
pub fn select_victims(
    request: &JobRequest,
    fleet: &Fleet,
    live: &BTreeMap<String, LiveJob>,
    policy: &EvictionPolicy,
) -> Option<Vec<String>> {
    let mut best: Option<(Vec<VictimKey>, String, Vec<String>)> = None;
    for k in 1.. {
        let mut any_candidates = false;
        for pod in fleet.pods.iter().filter(|p| request.matches_pod(p)) {
            let mut candidates: Vec<&LiveJob> = live
                .values()
                .filter(|j| j.alloc.pod_id == pod.id && j.request.priority < request.priority)
                .collect();
            if candidates.len() >= k {
                any_candidates = true;
            } else {
                continue;
            }
            candidates.sort_by_key(|j| victim_key(policy, fleet, j));
            let keep: Vec<&Allocation> = live
                .values()
                .filter(|j| j.alloc.pod_id == pod.id)
                .map(|j| &j.alloc)
                .collect();
            combinations(candidates.len(), k, &mut |idx| {
                let victims: Vec<&LiveJob> = idx.iter().map(|&i| candidates[i]).collect();
                let victim_ids: Vec<&str> =
                    victims.iter().map(|v| v.request.job_id.as_str()).collect();
                let remaining: Vec<&Allocation> = keep
                    .iter()
                    .copied()
                    .filter(|a| !victim_ids.contains(&a.job_id.as_str()))
                    .collect();
                if find_placement(request, pod, &remaining).is_some() {
                    let keys: Vec<VictimKey> = victims
                        .iter()
                        .map(|v| victim_key(policy, fleet, v))
                        .collect();
                    let ids: Vec<String> =
                        victims.iter().map(|v| v.request.job_id.clone()).collect();
                    let entry = (keys, pod.id.clone(), ids);
                    if best.as_ref().is_none_or(|b| entry < *b) {
                        best = Some(entry);
                    }
                    return true; // later combos in this pod have larger key vectors
                }
                false
            });
        }
        if let Some((_, _, ids)) = best {
            return Some(ids);
        }
        if !any_candidates {
            return None;
        }
    }
    unreachable!()
}

/// One scheduling pass's decisions.
#[derive(Debug, Clone, Default)]
pub struct TickOutcome {
    /// Jobs granted an allocation this tick, in grant order. A job both
    /// preempted and re-placed in the same tick appears in both lists.
    pub placements: Vec<Allocation>,
    /// `(victim, preempted_by)` pairs in eviction order.
    pub preemptions: Vec<(String, String)>,
    /// Requests whose shape can never fit any pod of their chip kind.
    pub unschedulable: Vec<String>,
}

fn can_ever_fit(request: &JobRequest, fleet: &Fleet) -> bool {
    fleet
        .pods
        .iter()
        .filter(|p| request.matches_pod(p))
        .any(|p| find_placement(request, p, &[]).is_some())
}

/// Run the placement loop over the pending queue at time `now`.
///
/// Requests are served in (priority desc, arrival asc, job id asc) order.
/// Each is placed directly if possible (minimizing post-placement
/// fragmentation across all feasible pods and placements), otherwise via
/// preemption of a minimal victim set, otherwise left pending. Preempted
/// jobs rejoin the queue and may be re-placed within the same tick.
pub fn schedule_tick(
    pending: &[JobRequest],
    live: &BTreeMap<String, LiveJob>,
    fleet: &Fleet,
    now: Micros,
    policy: &EvictionPolicy,
) -> TickOutcome {
    let mut outcome = TickOutcome::default();
    let mut live = live.clone();
    let mut queue: Vec<JobRequest> = pending.to_vec();

    loop {
        queue.sort_by(|a, b| {
            b.priority
                .cmp(&a.priority)
                .then(a.arrival.cmp(&b.arrival))
                .then(a.job_id.cmp(&b.job_id))
        });
        let mut progressed = false;
        let mut next_queue: Vec<JobRequest> = Vec::new();

        let snapshot = queue.clone();
        for request in snapshot {
            if !can_ever_fit(&request, fleet) {
                outcome.unschedulable.push(request.job_id.clone());
                continue;
            }
            // Direct placement, minimizing post-placement fragmentation.
            let mut choice: Option<(f64, &Pod, Vec<u32>, Vec<u32>)> = None;
            for pod in fleet.pods.iter().filter(|p| request.matches_pod(p)) {
                let pod_live: Vec<&Allocation> = live
                    .values()
                    .map(|j| &j.alloc)
                    .filter(|a| a.pod_id == pod.id)
                    .collect();
                for (origin, oriented) in enumerate_placements(&request, pod, &pod_live) {
                    let trial = Allocation {
                        job_id: request.job_id.clone(),
                        pod_id: pod.id.clone(),
                        origin: origin.clone(),
                        shape: oriented.clone(),
                        start: now,
                    };
                    let mut with_trial = pod_live.clone();
                    with_trial.push(&trial);
                    let score = fragmentation_score(pod, &with_trial);
                    let better = match &choice {
                        None => true,
                        Some((best_score, best_pod, best_origin, best_shape)) => {
                            match score.total_cmp(best_score) {
                                std::cmp::Ordering::Less => true,
                                std::cmp::Ordering::Greater => false,
                                std::cmp::Ordering::Equal => {
                                    (&pod.id, &oriented, &origin)
                                        < (&best_pod.id, best_shape, best_origin)
                                }
                            }
                        }
                    };
                    if better {
                        choice = Some((score, pod, origin, oriented));
                    }
                }
            }
            if let Some((_, pod, origin, oriented)) = choice {
                let alloc = Allocation {
                    job_id: request.job_id.clone(),
                    pod_id: pod.id.clone(),
                    origin,
                    shape: oriented,
                    start: now,
                };
                live.insert(
                    request.job_id.clone(),
                    LiveJob {
                        request: request.clone(),
                        alloc: alloc.clone(),
                    },
                );
                outcome.placements.push(alloc);
                progressed = true;
                continue;
            }
            // Preemption path.
            if let Some(victims) = select_victims(&request, fleet, &live, policy) {
                let mut evicted_requests = Vec::new();
                for victim in &victims {
                    let evicted = live.remove(victim).expect("victim is live");
                    outcome
                        .preemptions
                        .push((victim.clone(), request.job_id.clone()));
                    evicted_requests.push(evicted.request);
                }
                // The freed region admits the request by construction.
                let pod = fleet
                    .pods
                    .iter()
                    .find(|p| {
                        let pod_live: Vec<&Allocation> = live
                            .values()
                            .map(|j| &j.alloc)
                            .filter(|a| a.pod_id == p.id)
                            .collect();
                        request.matches_pod(p) && find_placement(&request, p, &pod_live).is_some()
                    })
                    .expect("victim removal admits placement");
                let pod_live: Vec<&Allocation> = live
                    .values()
                    .map(|j| &j.alloc)
                    .filter(|a| a.pod_id == pod.id)
                    .collect();
                let (origin, oriented) = find_placement(&request, pod, &pod_live).unwrap();
                let alloc = Allocation {
                    job_id: request.job_id.clone(),
                    pod_id: pod.id.clone(),
                    origin,
                    shape: oriented,
                    start: now,
                };
                live.insert(
                    request.job_id.clone(),
                    LiveJob {
                        request: request.clone(),
                        alloc: alloc.clone(),
                    },
                );
                outcome.placements.push(alloc);
                next_queue.extend(evicted_requests);
                progressed = true;
                continue;
            }
            next_queue.push(request);
        }

        queue = next_queue;
        if !progressed {
            break;
        }
    }
    outcome
}
