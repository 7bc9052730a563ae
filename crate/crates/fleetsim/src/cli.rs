//! Command implementations behind the `fleetsim` binary.
//!
//! Exit codes are a stable contract: 0 ok, 2 configuration error,
//! 3 I/O failure, 4 corrupt trace, 5 comparison-gate failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analytics::{compare_scenarios, segment_report, DEFAULT_DEADBAND};
use crate::error::Error;
use crate::goodput::{Analysis, Dimension, GoodputReport, Scope};
use crate::scenario::Scenario;
use crate::sim::run;
use crate::time::{secs_to_micros, Interval};
use crate::trace::Trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CORRUPT: i32 = 4;
pub const EXIT_GATE: i32 = 5;

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidComparison(_) | Error::UndefinedMetric(_) => {
            EXIT_CONFIG
        }
        Error::Overflow(_) => EXIT_CONFIG,
        Error::CorruptTrace { .. } => EXIT_CORRUPT,
        Error::Io(_) => EXIT_IO,
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code_for(err)
}

/// Run a scenario and write its trace. Prints one summary line.
pub fn cmd_simulate(scenario_path: &Path, out_path: &Path) -> i32 {
    let scenario = match Scenario::from_path(scenario_path) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let trace = match run(scenario) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    if let Err(e) = trace.save(out_path) {
        return fail(&e);
    }
    let completed = trace
        .events
        .iter()
        .filter(|e| e.kind == crate::trace::EventKind::JobCompleted)
        .count();
    println!(
        "simulated: {} jobs completed, horizon {} s, {} events",
        completed,
        trace.header.horizon_us as f64 / 1e6,
        trace.events.len()
    );
    EXIT_OK
}

/// Parse `a:b` (seconds) into a window.
pub fn parse_window(spec: &str) -> Result<Interval, Error> {
    let (a, b) = spec
        .split_once(':')
        .ok_or_else(|| Error::config("--window", "expected `start:end` in seconds"))?;
    let parse = |s: &str| -> Result<f64, Error> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::config("--window", format!("bad number `{s}`")))
    };
    let (start, end) = (parse(a)?, parse(b)?);
    if !(start >= 0.0 && end >= start) {
        return Err(Error::config("--window", "need 0 <= start <= end"));
    }
    Ok(Interval::new(secs_to_micros(start), secs_to_micros(end)))
}

/// Compute goodput reports for a trace; fleet row first, then one row per
/// segment when a dimension is given.
pub fn cmd_analyze(
    trace_path: &Path,
    window: Option<&str>,
    segment: Option<&str>,
    out_path: &Path,
) -> i32 {
    let trace = match Trace::load(trace_path) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let result = analyze_to_csv(&trace, window, segment);
    match result {
        Ok(csv) => {
            if let Err(e) = std::fs::write(out_path, csv) {
                return fail(&Error::Io(e));
            }
            EXIT_OK
        }
        Err(e) => fail(&e),
    }
}

pub fn analyze_to_csv(
    trace: &Trace,
    window: Option<&str>,
    segment: Option<&str>,
) -> Result<String, Error> {
    let scenario =
        trace.header.scenario.as_ref().ok_or_else(|| {
            Error::config("trace", "no embedded scenario to build the fleet from")
        })?;
    let fleet = scenario.build_fleet()?;
    let analysis = Analysis::from_trace(trace)?;
    let window = match window {
        Some(spec) => parse_window(spec)?,
        None => analysis.full_window(),
    };
    if window.end > analysis.horizon {
        return Err(Error::config(
            "--window",
            format!(
                "window ends at {} s but the trace horizon is {} s",
                window.end as f64 / 1e6,
                analysis.horizon as f64 / 1e6
            ),
        ));
    }
    let mut rows = vec![analysis.report(&fleet, window, Scope::Fleet)];
    if let Some(dim) = segment {
        let dimension = Dimension::parse(dim)?;
        rows.extend(segment_report(&analysis, &fleet, window, dimension));
    }
    let mut csv = String::from(GoodputReport::CSV_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row.csv_row());
        csv.push('\n');
    }
    Ok(csv)
}

/// Compare two paired traces under a declared single factor; exit 0 when
/// the observed signs match the factor's expected row.
pub fn cmd_compare(trace_a: &Path, trace_b: &Path, factor: &str, deadband: Option<f64>) -> i32 {
    let a = match Trace::load(trace_a) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let b = match Trace::load(trace_b) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let verdict = match compare_scenarios(&a, &b, factor, deadband.unwrap_or(DEFAULT_DEADBAND)) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    print!("{}", verdict.render());
    if verdict.matched {
        EXIT_OK
    } else {
        EXIT_GATE
    }
}

/// Sweep one scenario parameter over a value list: one trace and report
/// per value plus a summary CSV. Runs execute concurrently; outputs are
/// deterministic per value.
pub fn cmd_sweep(scenario_path: &Path, param: &str, values: &str, out_dir: &Path) -> i32 {
    let scenario = match Scenario::from_path(scenario_path) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let parsed: Vec<serde_json::Value> = match parse_values(values) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    if parsed.is_empty() {
        return fail(&Error::config("--values", "at least one value required"));
    }
    // Validate addressability and variants up front.
    let mut variants = Vec::new();
    for value in &parsed {
        match scenario.with_param(param, value.clone()) {
            Ok(v) => variants.push(v),
            Err(e) => return fail(&e),
        }
    }
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return fail(&Error::Io(e));
    }
    let results: Vec<Result<(PathBuf, GoodputReport), Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .into_iter()
            .enumerate()
            .map(|(i, variant)| {
                let out_dir = out_dir.to_path_buf();
                scope.spawn(move || -> Result<(PathBuf, GoodputReport), Error> {
                    let trace = run(variant)?;
                    let path = out_dir.join(format!("trace_{i:03}.jsonl"));
                    trace.save(&path)?;
                    let fleet = trace
                        .header
                        .scenario
                        .as_ref()
                        .expect("simulator embeds the scenario")
                        .build_fleet()?;
                    let analysis = Analysis::from_trace(&trace)?;
                    let report = analysis.report(&fleet, analysis.full_window(), Scope::Fleet);
                    Ok((path, report))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let summary_path = out_dir.join("summary.csv");
    let mut summary = String::from("value,sg,rg,pg,mpg,trace\n");
    for (value, result) in parsed.iter().zip(results) {
        match result {
            Ok((path, report)) => {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                summary.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    value,
                    opt(report.sg),
                    opt(report.rg),
                    opt(report.pg),
                    opt(report.mpg),
                    path.file_name().unwrap().to_string_lossy()
                ));
            }
            Err(e) => return fail(&e),
        }
    }
    match std::fs::File::create(&summary_path).and_then(|mut f| f.write_all(summary.as_bytes())) {
        Ok(()) => {
            println!(
                "sweep: {} runs, summary at {}",
                parsed.len(),
                summary_path.display()
            );
            EXIT_OK
        }
        Err(e) => fail(&Error::Io(e)),
    }
}

fn parse_values(values: &str) -> Result<Vec<serde_json::Value>, Error> {
    values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let t = s.trim();
            let v = serde_json::from_str::<serde_json::Value>(t)
                .map_err(|_| Error::config("--values", format!("not a scalar: `{t}`")))?;
            if !(v.is_number() || v.is_boolean()) {
                return Err(Error::config(
                    "--values",
                    format!("sweep values must be numeric or boolean, got `{t}`"),
                ));
            }
            Ok(v)
        })
        .collect()
}
