//! Exit-code contract and file-format checks for the `fleetsim` binary:
//! 0 ok, 2 config, 3 I/O, 4 corrupt trace, 5 gate failure.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fleetsim"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn simulate_writes_trace_and_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1 jobs completed"), "{stdout}");
    assert!(trace.exists());

    // idempotence: identical inputs reproduce byte-identical outputs
    let trace2 = dir.path().join("trace2.jsonl");
    let out = run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        trace2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(&trace).unwrap(),
        std::fs::read(&trace2).unwrap()
    );
}

#[test]
fn simulate_rejects_bad_config_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("minimal.toml"))
        .unwrap()
        .replace("init_time = 5.0", "init_time = -1.0");
    std::fs::write(&bad, text).unwrap();
    let out = run(&[
        "simulate",
        "-s",
        bad.to_str().unwrap(),
        "-o",
        dir.path().join("t.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("jobs[0].runtime.init_time"), "{stderr}");
}

#[test]
fn simulate_unwritable_output_is_io_failure() {
    let out = run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        "/nonexistent-dir/trace.jsonl",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn analyze_emits_fleet_row_and_segments() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    assert_eq!(
        code(&run(&[
            "simulate",
            "-s",
            scenario("eviction_preference.toml").to_str().unwrap(),
            "-o",
            trace.to_str().unwrap(),
        ])),
        0
    );
    let csv_path = dir.path().join("report.csv");
    let out = run(&[
        "analyze",
        "-t",
        trace.to_str().unwrap(),
        "--segment",
        "size_class",
        "-o",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("scope,window_start_s"));
    assert!(lines[1].starts_with("fleet,"));
    // four size classes present in this scenario
    assert_eq!(lines.len(), 1 + 1 + 4, "{csv}");

    // fleet row satisfies mpg = sg * rg * pg
    let fields: Vec<&str> = lines[1].split(',').collect();
    let sg: f64 = fields[5].parse().unwrap();
    let rg: f64 = fields[8].parse().unwrap();
    let pg: f64 = fields[11].parse().unwrap();
    let mpg: f64 = fields[12].parse().unwrap();
    assert_eq!(mpg, sg * rg * pg);
}

#[test]
fn analyze_window_restricts_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        trace.to_str().unwrap(),
    ]);
    let csv_path = dir.path().join("report.csv");
    let out = run(&[
        "analyze",
        "-t",
        trace.to_str().unwrap(),
        "--window",
        "0:10",
        "-o",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    // the job holds all 4 chips for the whole 10 s window
    assert_eq!(fields[3], "40");
    assert_eq!(fields[4], "40");
}

#[test]
fn analyze_and_sweep_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        trace.to_str().unwrap(),
    ]);
    let (r1, r2) = (dir.path().join("r1.csv"), dir.path().join("r2.csv"));
    for r in [&r1, &r2] {
        assert_eq!(
            code(&run(&[
                "analyze",
                "-t",
                trace.to_str().unwrap(),
                "-o",
                r.to_str().unwrap()
            ])),
            0
        );
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());

    let (s1, s2) = (dir.path().join("s1"), dir.path().join("s2"));
    for s in [&s1, &s2] {
        assert_eq!(
            code(&run(&[
                "sweep",
                "-s",
                scenario("minimal.toml").to_str().unwrap(),
                "--param",
                "jobs[0].runtime.checkpoint_interval",
                "--values",
                "2,5",
                "-o",
                s.to_str().unwrap(),
            ])),
            0
        );
    }
    for name in ["summary.csv", "trace_000.jsonl", "trace_001.jsonl"] {
        assert_eq!(
            std::fs::read(s1.join(name)).unwrap(),
            std::fs::read(s2.join(name)).unwrap(),
            "{name} differs across reruns"
        );
    }
}

#[test]
fn analyze_rejects_window_beyond_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        trace.to_str().unwrap(),
    ]);
    let out = run(&[
        "analyze",
        "-t",
        trace.to_str().unwrap(),
        "--window",
        "0:999",
        "-o",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn analyze_corrupt_trace_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        trace.to_str().unwrap(),
    ]);
    // truncate mid-file: drop everything after line 3 and garble line 3
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.truncate(3);
    lines[2] = "{\"truncated";
    std::fs::write(&trace, lines.join("\n")).unwrap();
    let out = run(&[
        "analyze",
        "-t",
        trace.to_str().unwrap(),
        "-o",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn compare_gate_passes_fails_and_guards() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    run(&[
        "simulate",
        "-s",
        scenario("compiler_device_base.toml").to_str().unwrap(),
        "-o",
        a.to_str().unwrap(),
    ]);
    run(&[
        "simulate",
        "-s",
        scenario("compiler_device_opt.toml").to_str().unwrap(),
        "-o",
        b.to_str().unwrap(),
    ]);

    let out = run(&[
        "compare",
        "-a",
        a.to_str().unwrap(),
        "-b",
        b.to_str().unwrap(),
        "--factor",
        "jobs[0].profile.device_compute_time",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verdict=match"), "{stdout}");

    // deliberately inverted pair: the gate must fail
    let out = run(&[
        "compare",
        "-a",
        b.to_str().unwrap(),
        "-b",
        a.to_str().unwrap(),
        "--factor",
        "jobs[0].profile.device_compute_time",
    ]);
    assert_eq!(code(&out), 5);

    // unrelated traces: pairing guard
    let c = dir.path().join("c.jsonl");
    run(&[
        "simulate",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "-o",
        c.to_str().unwrap(),
    ]);
    let out = run(&[
        "compare",
        "-a",
        a.to_str().unwrap(),
        "-b",
        c.to_str().unwrap(),
        "--factor",
        "jobs[0].profile.device_compute_time",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_produces_summary_and_validates_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "--param",
        "jobs[0].runtime.checkpoint_interval",
        "--values",
        "1,5,10",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4, "{summary}");
    for i in 0..3 {
        assert!(out_dir.join(format!("trace_{i:03}.jsonl")).exists());
    }

    // empty value list
    let out = run(&[
        "sweep",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "--param",
        "jobs[0].runtime.checkpoint_interval",
        "--values",
        "",
        "-o",
        dir.path().join("s2").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    // non-addressable parameter
    let out = run(&[
        "sweep",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "--param",
        "jobs[0].no_such_field",
        "--values",
        "1",
        "-o",
        dir.path().join("s3").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);

    // only numeric or boolean values are sweepable
    let out = run(&[
        "sweep",
        "-s",
        scenario("minimal.toml").to_str().unwrap(),
        "--param",
        "jobs[0].id",
        "--values",
        "\"other\"",
        "-o",
        dir.path().join("s4").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}
