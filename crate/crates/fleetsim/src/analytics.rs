//! Segmentation, time series, paired-scenario comparison, and
//! mix-shift (Simpson) detection over goodput reports.
//!
//! Aggregation is always numerator/denominator summation, never a mean
//! of ratios. Example: segments with pg 4/10 and 6/10 aggregate to
//! 10/20 = 0.5, whereas segments 1/2 and 30/100 would aggregate to
//! 31/102 = 0.30, not the 0.4 a mean of ratios would claim.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fleet::Fleet;
use crate::goodput::{Analysis, Dimension, GoodputReport, Scope, SegmentKey};
use crate::program::{actual_step_time, Boundedness};
use crate::time::{Interval, Micros};
use crate::trace::Trace;

/// Default no-change band on metric deltas; avoids reading floating-point
/// noise as a regression.
pub const DEFAULT_DEADBAND: f64 = 1e-6;

/// One report per observed value of `dimension`, chip-time weighted.
/// Segments with no jobs never appear; numerators across segments sum to
/// the fleet numerators.
pub fn segment_report(
    analysis: &Analysis,
    fleet: &Fleet,
    window: Interval,
    dimension: Dimension,
) -> Vec<GoodputReport> {
    analysis
        .segment_values(fleet, dimension)
        .into_iter()
        .map(|value| {
            analysis.report(
                fleet,
                window,
                Scope::Segment(SegmentKey { dimension, value }),
            )
        })
        .collect()
}

/// Fleet reports over contiguous windows tiling the horizon.
pub fn timeseries(
    analysis: &Analysis,
    fleet: &Fleet,
    bucket_width: Micros,
) -> Result<Vec<GoodputReport>> {
    if bucket_width == 0 {
        return Err(Error::config("bucket width", "must be > 0"));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < analysis.horizon {
        let end = (start + bucket_width).min(analysis.horizon);
        out.push(analysis.report(fleet, Interval::new(start, end), Scope::Fleet));
        start = end;
    }
    Ok(out)
}

/// The change archetypes of the optimization matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorRow {
    /// Compiler-layer change: on-duty step time decreases.
    StepTime,
    /// Runtime-layer change: off-duty or preemption waste decreases.
    RuntimeWaste,
    /// Scheduler-layer change: partially-allocated time decreases.
    SchedulingGap,
}

impl FactorRow {
    pub fn name(&self) -> &'static str {
        match self {
            FactorRow::StepTime => "step_time",
            FactorRow::RuntimeWaste => "runtime_waste",
            FactorRow::SchedulingGap => "scheduling_gap",
        }
    }

    /// Expected per-metric signs (sg, rg, pg, mpg) for an improvement of
    /// this row; `None` means the sign is not constrained.
    fn expected(&self, bound: Option<Boundedness>) -> [Option<i8>; 4] {
        match (self, bound) {
            (FactorRow::StepTime, Some(Boundedness::HostBound)) => {
                // a device-side gain is invisible behind the host path;
                // only "no net effect" is required
                [None, None, None, Some(0)]
            }
            (FactorRow::StepTime, _) => [Some(-1), Some(-1), Some(1), Some(1)],
            (FactorRow::RuntimeWaste, _) => [Some(-1), Some(1), Some(0), Some(1)],
            (FactorRow::SchedulingGap, _) => [Some(1), Some(0), Some(0), Some(1)],
        }
    }
}

/// Classify a parameter path onto its optimization-matrix row.
pub fn classify_factor(path: &str) -> Result<FactorRow> {
    if path.contains(".profile.") || path.starts_with("passes") {
        Ok(FactorRow::StepTime)
    } else if path.contains(".runtime.") {
        Ok(FactorRow::RuntimeWaste)
    } else if path.ends_with(".arrival") || path.starts_with("scheduler") {
        Ok(FactorRow::SchedulingGap)
    } else {
        Err(Error::InvalidComparison(format!(
            "factor `{path}` does not map onto a known optimization row"
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricDelta {
    pub metric: &'static str,
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub delta: f64,
    /// -1, 0, +1 under the dead-band.
    pub sign: i8,
    /// Expected sign for the declared row, when constrained.
    pub expected: Option<i8>,
}

/// Outcome of a paired single-factor comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonVerdict {
    pub factor: String,
    pub row: FactorRow,
    pub bound: Option<Boundedness>,
    pub deadband: f64,
    pub deltas: Vec<MetricDelta>,
    pub matched: bool,
}

impl ComparisonVerdict {
    /// Structured text rendering, one record per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let bound = match self.bound {
            Some(Boundedness::DeviceBound) => "device",
            Some(Boundedness::HostBound) => "host",
            None => "n/a",
        };
        out.push_str(&format!(
            "factor={} row={} bound={} deadband={}\n",
            self.factor,
            self.row.name(),
            bound,
            self.deadband
        ));
        for d in &self.deltas {
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or("-".into());
            let expect = d
                .expected
                .map(|s| sign_str(s).to_string())
                .unwrap_or("any".into());
            out.push_str(&format!(
                "metric={} before={} after={} delta={} sign={} expected={}\n",
                d.metric,
                fmt_opt(d.before),
                fmt_opt(d.after),
                d.delta,
                sign_str(d.sign),
                expect
            ));
        }
        out.push_str(&format!(
            "verdict={}\n",
            if self.matched { "match" } else { "mismatch" }
        ));
        out
    }
}

fn sign_str(s: i8) -> &'static str {
    match s.cmp(&0) {
        std::cmp::Ordering::Greater => "+",
        std::cmp::Ordering::Less => "-",
        std::cmp::Ordering::Equal => "0",
    }
}

fn sign_of(delta: f64, deadband: f64) -> i8 {
    if delta > deadband {
        1
    } else if delta < -deadband {
        -1
    } else {
        0
    }
}

/// Verify that two traces come from scenarios identical up to the
/// declared factor, then compare their fleet goodput.
///
/// `trace_a` is the baseline, `trace_b` the candidate; deltas are
/// `after - before`, so swapping the traces negates every sign.
pub fn compare_scenarios(
    trace_a: &Trace,
    trace_b: &Trace,
    factor: &str,
    deadband: f64,
) -> Result<ComparisonVerdict> {
    let row = classify_factor(factor)?;
    let scenario_a = trace_a
        .header
        .scenario
        .as_ref()
        .ok_or_else(|| Error::InvalidComparison("trace a has no embedded scenario".into()))?;
    let scenario_b = trace_b
        .header
        .scenario
        .as_ref()
        .ok_or_else(|| Error::InvalidComparison("trace b has no embedded scenario".into()))?;

    let mut doc_a = serde_json::to_value(scenario_a).expect("scenario serializes");
    let mut doc_b = serde_json::to_value(scenario_b).expect("scenario serializes");
    for doc in [&mut doc_a, &mut doc_b] {
        match lookup_mut(doc, factor) {
            Some(slot) => *slot = serde_json::Value::Null,
            None => {
                return Err(Error::InvalidComparison(format!(
                    "factor `{factor}` does not address a scenario field"
                )))
            }
        }
    }
    if doc_a != doc_b {
        return Err(Error::InvalidComparison(
            "scenarios differ in more than the declared factor".into(),
        ));
    }

    let bound = match row {
        FactorRow::StepTime => Some(step_time_boundedness(scenario_a, scenario_b, factor)),
        _ => None,
    };

    let fleet_a = scenario_a.build_fleet()?;
    let fleet_b = scenario_b.build_fleet()?;
    let analysis_a = Analysis::from_trace(trace_a)?;
    let analysis_b = Analysis::from_trace(trace_b)?;
    let report_a = analysis_a.report(&fleet_a, analysis_a.full_window(), Scope::Fleet);
    let report_b = analysis_b.report(&fleet_b, analysis_b.full_window(), Scope::Fleet);

    let expected = row.expected(bound);
    let values = [
        ("sg", report_a.sg, report_b.sg, expected[0]),
        ("rg", report_a.rg, report_b.rg, expected[1]),
        ("pg", report_a.pg, report_b.pg, expected[2]),
        ("mpg", report_a.mpg, report_b.mpg, expected[3]),
    ];
    let mut deltas = Vec::new();
    let mut matched = true;
    for (metric, before, after, expect) in values {
        let delta = match (before, after) {
            (Some(x), Some(y)) => y - x,
            _ => f64::NAN,
        };
        let sign = if delta.is_nan() {
            0
        } else {
            sign_of(delta, deadband)
        };
        if delta.is_nan() || expect.is_some_and(|e| e != sign) {
            matched = false;
        }
        deltas.push(MetricDelta {
            metric,
            before,
            after,
            delta,
            sign,
            expected: expect,
        });
    }
    Ok(ComparisonVerdict {
        factor: factor.to_string(),
        row,
        bound,
        deadband,
        deltas,
        matched,
    })
}

/// Boundedness context for a step-time factor: host-bound only when the
/// affected jobs are host-bound in both variants.
fn step_time_boundedness(
    a: &crate::scenario::Scenario,
    b: &crate::scenario::Scenario,
    factor: &str,
) -> Boundedness {
    let affected: Vec<usize> = if let Some(idx) = job_index(factor) {
        vec![idx]
    } else {
        (0..a.jobs.len()).collect()
    };
    let host_bound_everywhere = affected.iter().all(|&i| {
        let in_a = matches!(
            actual_step_time(&a.jobs[i].profile).1,
            Boundedness::HostBound
        );
        let in_b = b
            .jobs
            .get(i)
            .map(|j| matches!(actual_step_time(&j.profile).1, Boundedness::HostBound))
            .unwrap_or(false);
        in_a && in_b
    });
    if host_bound_everywhere {
        Boundedness::HostBound
    } else {
        Boundedness::DeviceBound
    }
}

fn job_index(path: &str) -> Option<usize> {
    let rest = path.strip_prefix("jobs[")?;
    let end = rest.find(']')?;
    rest[..end].parse().ok()
}

fn lookup_mut<'a>(doc: &'a mut serde_json::Value, path: &str) -> Option<&'a mut serde_json::Value> {
    let mut cur = doc;
    for part in path.split('.') {
        let mut rest = part;
        while let Some(open) = rest.find('[') {
            let name = &rest[..open];
            if !name.is_empty() {
                cur = cur.get_mut(name)?;
            }
            let close = rest.find(']')?;
            let idx: usize = rest[open + 1..close].parse().ok()?;
            cur = cur.get_mut(idx)?;
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            cur = cur.get_mut(rest)?;
        }
    }
    Some(cur)
}

/// Metric selector for trend checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Sg,
    Rg,
    Pg,
    Mpg,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Sg => "sg",
            Metric::Rg => "rg",
            Metric::Pg => "pg",
            Metric::Mpg => "mpg",
        }
    }

    fn value(&self, r: &GoodputReport) -> Option<f64> {
        match self {
            Metric::Sg => r.sg,
            Metric::Rg => r.rg,
            Metric::Pg => r.pg,
            Metric::Mpg => r.mpg,
        }
    }

    /// Chip-time weight behind the metric's ratio.
    fn weight(&self, r: &GoodputReport) -> f64 {
        match self {
            Metric::Sg => r.sg_den,
            Metric::Rg => r.rg_den,
            Metric::Pg => r.pg_den,
            Metric::Mpg => r.sg_den,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SegmentEvidence {
    pub segment: String,
    pub before: f64,
    pub after: f64,
    pub sign: i8,
    pub weight_before: f64,
    pub weight_after: f64,
}

/// Result of a mix-shift check between two time points.
#[derive(Debug, Clone)]
pub struct SimpsonFinding {
    pub metric: Metric,
    pub aggregate_before: f64,
    pub aggregate_after: f64,
    pub aggregate_sign: i8,
    pub segments: Vec<SegmentEvidence>,
    /// Set when the aggregate trend contradicts every segment trend: a
    /// weight-shift artifact, not a real regression or gain.
    pub flagged: bool,
}

/// Compare aggregate-vs-segment trends across two report sets.
///
/// `before`/`after` are per-segment reports over two windows of the same
/// trace (or two runs); `aggregate_*` the matching fleet reports.
pub fn simpson_check(
    metric: Metric,
    before: &[GoodputReport],
    after: &[GoodputReport],
    aggregate_before: &GoodputReport,
    aggregate_after: &GoodputReport,
    deadband: f64,
) -> SimpsonFinding {
    let (agg_b, agg_a) = (
        metric.value(aggregate_before).unwrap_or(f64::NAN),
        metric.value(aggregate_after).unwrap_or(f64::NAN),
    );
    let aggregate_sign = if agg_b.is_nan() || agg_a.is_nan() {
        0
    } else {
        sign_of(agg_a - agg_b, deadband)
    };
    let mut segments = Vec::new();
    for rb in before {
        let Some(ra) = after.iter().find(|r| r.scope == rb.scope) else {
            continue;
        };
        let (Some(vb), Some(va)) = (metric.value(rb), metric.value(ra)) else {
            continue;
        };
        segments.push(SegmentEvidence {
            segment: rb.scope.to_string(),
            before: vb,
            after: va,
            sign: sign_of(va - vb, deadband),
            weight_before: metric.weight(rb),
            weight_after: metric.weight(ra),
        });
    }
    let flagged = aggregate_sign != 0
        && !segments.is_empty()
        && segments.iter().all(|s| s.sign == -aggregate_sign);
    SimpsonFinding {
        metric,
        aggregate_before: agg_b,
        aggregate_after: agg_a,
        aggregate_sign,
        segments,
        flagged,
    }
}
