//! Hardware universe: chip kinds, rectangular meshes, pods, and fleet
//! capacity accounting.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{ChipMicros, Interval};

/// An accelerator model. `peak_flops` is the per-chip roofline constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipKind {
    pub name: String,
    pub peak_flops: f64,
    /// Mean time between failures per chip, seconds.
    pub mtbf: f64,
    /// Hardware generation label, used for lifecycle segmentation.
    pub generation_tag: String,
}

/// Requested or provisioned mesh shape: 1 to 3 chips-per-axis extents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeshShape {
    pub dims: Vec<u32>,
}

impl MeshShape {
    pub fn new(dims: Vec<u32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::config(
                "shape",
                format!("mesh must have 1-3 axes, got {}", dims.len()),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::config("shape", "mesh axis extents must be >= 1"));
        }
        Ok(MeshShape { dims })
    }

    pub fn chip_count(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }

    /// Pad with unit axes up to `rank` (a `[2,2]` request occupies a
    /// `[2,2,1]` block of a 3-d pod).
    pub fn padded(&self, rank: usize) -> Vec<u32> {
        let mut dims = self.dims.clone();
        while dims.len() < rank {
            dims.push(1);
        }
        dims
    }
}

impl fmt::Display for MeshShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strs: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "[{}]", strs.join(","))
    }
}

/// A rectangular lattice of chips of one kind; the unit of placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pod {
    pub id: String,
    pub chip_kind: String,
    pub shape: MeshShape,
    /// Location identifier for data-cell affinity.
    pub cell: String,
}

impl Pod {
    pub fn chip_count(&self) -> u64 {
        self.shape.chip_count()
    }
}

/// Job size taxonomy. Boundaries come from [`Fleet::size_thresholds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
    Xl,
}

impl SizeClass {
    pub const ALL: [SizeClass; 4] = [
        SizeClass::Small,
        SizeClass::Medium,
        SizeClass::Large,
        SizeClass::Xl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
            SizeClass::Xl => "xl",
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_SIZE_THRESHOLDS: [u64; 3] = [8, 256, 2048];

/// The whole hardware estate: pods plus the size-class boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub chip_kinds: BTreeMap<String, ChipKind>,
    pub pods: Vec<Pod>,
    /// Three ascending chip counts: small <= t0 < medium <= t1 < large <= t2 < xl.
    pub size_thresholds: [u64; 3],
}

impl Fleet {
    /// Validate and assemble a fleet. Pods come out sorted by id so every
    /// downstream iteration order is deterministic.
    pub fn build(
        chip_kinds: Vec<ChipKind>,
        pods: Vec<Pod>,
        size_thresholds: Option<[u64; 3]>,
    ) -> Result<Self> {
        let mut kinds = BTreeMap::new();
        for (i, kind) in chip_kinds.into_iter().enumerate() {
            if kind.peak_flops <= 0.0 {
                return Err(Error::config(
                    format!("chip_kinds[{i}].peak_flops"),
                    "must be > 0",
                ));
            }
            if kind.mtbf <= 0.0 {
                return Err(Error::config(
                    format!("chip_kinds[{i}].mtbf"),
                    "must be > 0",
                ));
            }
            if kinds.insert(kind.name.clone(), kind).is_some() {
                return Err(Error::config(
                    format!("chip_kinds[{i}].name"),
                    "duplicate chip kind name",
                ));
            }
        }
        if pods.is_empty() {
            return Err(Error::config("pods", "at least one pod is required"));
        }
        let mut sorted = pods;
        for (i, pod) in sorted.iter().enumerate() {
            if !kinds.contains_key(&pod.chip_kind) {
                return Err(Error::config(
                    format!("pods[{i}].chip_kind"),
                    format!("unknown chip kind `{}`", pod.chip_kind),
                ));
            }
            MeshShape::new(pod.shape.dims.clone())
                .map_err(|_| Error::config(format!("pods[{i}].shape"), "invalid mesh shape"))?;
        }
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        for w in sorted.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::config(
                    "pods",
                    format!("duplicate pod id `{}`", w[0].id),
                ));
            }
        }
        let thresholds = size_thresholds.unwrap_or(DEFAULT_SIZE_THRESHOLDS);
        if !(thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2]) {
            return Err(Error::config(
                "fleet.size_thresholds",
                "thresholds must be strictly ascending",
            ));
        }
        Ok(Fleet {
            chip_kinds: kinds,
            pods: sorted,
            size_thresholds: thresholds,
        })
    }

    pub fn total_chips(&self) -> u64 {
        self.pods.iter().map(|p| p.chip_count()).sum()
    }

    pub fn pod(&self, id: &str) -> Option<&Pod> {
        self.pods.iter().find(|p| p.id == id)
    }

    pub fn chip_kind(&self, name: &str) -> Option<&ChipKind> {
        self.chip_kinds.get(name)
    }

    /// Total chip-time over a window, in chip-microseconds. This is the
    /// fleet-scope scheduling-goodput denominator.
    pub fn capacity(&self, window: Interval) -> ChipMicros {
        self.total_chips() as ChipMicros * window.len() as ChipMicros
    }

    /// Size class of a job requesting `chip_count` chips.
    pub fn classify_size(&self, chip_count: u64) -> SizeClass {
        assert!(chip_count >= 1, "chip_count must be >= 1");
        let [t1, t2, t3] = self.size_thresholds;
        if chip_count <= t1 {
            SizeClass::Small
        } else if chip_count <= t2 {
            SizeClass::Medium
        } else if chip_count <= t3 {
            SizeClass::Large
        } else {
            SizeClass::Xl
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Interval;

    fn kind(name: &str) -> ChipKind {
        ChipKind {
            name: name.to_string(),
            peak_flops: 1e12,
            mtbf: 1e6,
            generation_tag: "gen1".to_string(),
        }
    }

    fn pod(id: &str, dims: Vec<u32>) -> Pod {
        Pod {
            id: id.to_string(),
            chip_kind: "tpu-a".to_string(),
            shape: MeshShape { dims },
            cell: "cell-a".to_string(),
        }
    }

    #[test]
    fn build_counts_chips() {
        let fleet = Fleet::build(vec![kind("tpu-a")], vec![pod("p0", vec![2, 2])], None).unwrap();
        assert_eq!(fleet.total_chips(), 4);

        let fleet = Fleet::build(
            vec![kind("tpu-a")],
            vec![pod("p0", vec![4, 4, 4]), pod("p1", vec![2, 2])],
            None,
        )
        .unwrap();
        assert_eq!(fleet.total_chips(), 64 + 4);
    }

    #[test]
    fn build_rejects_zero_dim() {
        let err = Fleet::build(vec![kind("tpu-a")], vec![pod("p0", vec![0, 2])], None).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn build_rejects_unknown_kind_and_duplicate_id() {
        let mut bad = pod("p0", vec![2]);
        bad.chip_kind = "nope".into();
        assert!(Fleet::build(vec![kind("tpu-a")], vec![bad], None).is_err());

        let err = Fleet::build(
            vec![kind("tpu-a")],
            vec![pod("p0", vec![2]), pod("p0", vec![4])],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate pod id"));
    }

    #[test]
    fn capacity_examples() {
        let fleet = Fleet::build(vec![kind("tpu-a")], vec![pod("p0", vec![2, 2])], None).unwrap();
        assert_eq!(fleet.capacity(Interval::new(0, 100_000_000)), 400_000_000);
        // empty window
        assert_eq!(fleet.capacity(Interval::new(10, 10)), 0);

        // 64-chip pod + 4-chip pod over 50 s: sum over pods of chips x duration
        let fleet = Fleet::build(
            vec![kind("tpu-a")],
            vec![pod("p0", vec![4, 4, 4]), pod("p1", vec![2, 2])],
            None,
        )
        .unwrap();
        let window = Interval::new(0, 50_000_000);
        let per_pod: ChipMicros = fleet
            .pods
            .iter()
            .map(|p| p.chip_count() as ChipMicros * window.len() as ChipMicros)
            .sum();
        assert_eq!(fleet.capacity(window), per_pod);
        assert_eq!(fleet.capacity(window), 3_400_000_000);
    }

    #[test]
    fn capacity_additive_over_disjoint_windows() {
        let fleet = Fleet::build(vec![kind("tpu-a")], vec![pod("p0", vec![4, 4])], None).unwrap();
        let a = Interval::new(0, 123_456);
        let b = Interval::new(123_456, 999_999);
        assert_eq!(
            fleet.capacity(a) + fleet.capacity(b),
            fleet.capacity(Interval::new(0, 999_999))
        );
    }

    #[test]
    fn classify_size_defaults() {
        let fleet = Fleet::build(vec![kind("tpu-a")], vec![pod("p0", vec![2])], None).unwrap();
        assert_eq!(fleet.classify_size(1), SizeClass::Small);
        assert_eq!(fleet.classify_size(64), SizeClass::Medium);
        assert_eq!(fleet.classify_size(4096), SizeClass::Xl);
    }

    #[test]
    fn classify_size_monotone() {
        let fleet = Fleet::build(vec![kind("tpu-a")], vec![pod("p0", vec![2])], None).unwrap();
        let mut prev = fleet.classify_size(1);
        for n in 2..5000 {
            let cur = fleet.classify_size(n);
            assert!(cur >= prev, "not monotone at {n}");
            prev = cur;
        }
    }

    #[test]
    fn size_class_total_order() {
        assert!(SizeClass::Small < SizeClass::Medium);
        assert!(SizeClass::Medium < SizeClass::Large);
        assert!(SizeClass::Large < SizeClass::Xl);
    }
}
