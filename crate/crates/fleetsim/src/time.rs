//! Exact time accounting.
//!
//! All chip-time bookkeeping runs on integer microseconds from scenario
//! start, converted to floating point only when final ratios are formed.

use serde::{Deserialize, Serialize};

/// A point in time or a duration, in integer microseconds.
pub type Micros = u64;

/// Chip-time in chip-microseconds. Wide enough that `chips × horizon`
/// never overflows at any plausible desk scale.
pub type ChipMicros = u128;

pub const MICROS_PER_SEC: f64 = 1_000_000.0;

/// Convert seconds (as found in scenario files) to integer microseconds.
pub fn secs_to_micros(secs: f64) -> Micros {
    (secs * MICROS_PER_SEC).round() as Micros
}

pub fn micros_to_secs(us: Micros) -> f64 {
    us as f64 / MICROS_PER_SEC
}

pub fn chip_micros_to_chip_secs(cus: ChipMicros) -> f64 {
    cus as f64 / MICROS_PER_SEC
}

/// Half-open interval `[start, end)` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Micros,
    pub end: Micros,
}

impl Interval {
    pub fn new(start: Micros, end: Micros) -> Self {
        debug_assert!(start <= end);
        Interval { start, end }
    }

    pub fn len(&self) -> Micros {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        if start < end {
            Some(Interval { start, end })
        } else {
            None
        }
    }
}

/// A normalized set of pairwise-disjoint, sorted, half-open intervals.
///
/// Adjacent intervals are merged, empties dropped; two sets covering the
/// same instants are structurally equal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn new() -> Self {
        IntervalSet::default()
    }

    pub fn from_interval(start: Micros, end: Micros) -> Self {
        let mut s = IntervalSet::new();
        s.insert(start, end);
        s
    }

    /// Build from arbitrary (possibly overlapping, unsorted) pairs.
    pub fn from_pairs<I: IntoIterator<Item = (Micros, Micros)>>(pairs: I) -> Self {
        let mut raw: Vec<Interval> = pairs
            .into_iter()
            .filter(|(s, e)| s < e)
            .map(|(s, e)| Interval::new(s, e))
            .collect();
        raw.sort_by_key(|iv| (iv.start, iv.end));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match out.last_mut() {
                Some(last) if iv.start <= last.end => {
                    last.end = last.end.max(iv.end);
                }
                _ => out.push(iv),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn insert(&mut self, start: Micros, end: Micros) {
        if start >= end {
            return;
        }
        match self.intervals.last_mut() {
            None => self.intervals.push(Interval::new(start, end)),
            // Strictly past the tail: append.
            Some(last) if start > last.end => self.intervals.push(Interval::new(start, end)),
            // Overlaps or touches the tail: extend in place.
            Some(last) if start >= last.start => last.end = last.end.max(end),
            // Out-of-order insert: renormalize.
            _ => {
                let mut pairs: Vec<(Micros, Micros)> =
                    self.intervals.iter().map(|iv| (iv.start, iv.end)).collect();
                pairs.push((start, end));
                *self = IntervalSet::from_pairs(pairs);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval> {
        self.intervals.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total covered duration in microseconds.
    pub fn total(&self) -> Micros {
        self.intervals.iter().map(|iv| iv.len()).sum()
    }

    pub fn contains(&self, t: Micros) -> bool {
        self.intervals
            .binary_search_by(|iv| {
                if t < iv.start {
                    std::cmp::Ordering::Greater
                } else if t >= iv.end {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_pairs(
            self.intervals
                .iter()
                .chain(other.intervals.iter())
                .map(|iv| (iv.start, iv.end)),
        )
    }

    /// Set intersection by linear sweep over both sorted interval lists.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = &self.intervals[i];
            let b = &other.intervals[j];
            if let Some(iv) = a.intersect(b) {
                out.push(iv);
            }
            if a.end <= b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }

    /// Intersect many sets; the empty intersection of zero sets is empty.
    pub fn intersect_all<'a, I: IntoIterator<Item = &'a IntervalSet>>(sets: I) -> IntervalSet {
        let mut it = sets.into_iter();
        let first = match it.next() {
            Some(s) => s.clone(),
            None => return IntervalSet::new(),
        };
        it.fold(first, |acc, s| acc.intersect(s))
    }

    /// Restrict to a window.
    pub fn clip(&self, window: Interval) -> IntervalSet {
        self.intersect(&IntervalSet::from_interval(window.start, window.end))
    }

    /// Microseconds of overlap with `window`.
    pub fn overlap(&self, window: Interval) -> Micros {
        self.intervals
            .iter()
            .filter_map(|iv| iv.intersect(&window))
            .map(|iv| iv.len())
            .sum()
    }
}

impl FromIterator<(Micros, Micros)> for IntervalSet {
    fn from_iter<I: IntoIterator<Item = (Micros, Micros)>>(iter: I) -> Self {
        IntervalSet::from_pairs(iter)
    }
}
