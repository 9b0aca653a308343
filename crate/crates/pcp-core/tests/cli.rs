//! End-to-end checks of the `pcp` binary: output formats, determinism, and
//! exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn pcp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn settle_prints_worked_example_table() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("hour.toml");
    std::fs::write(
        &scenario,
        "effective = [30.0, 30.0, 40.0]\n\
         realtime = [40.0, 35.0, 35.0]\n\
         day_ahead = 30.0\n\
         real_time = 20.0\n",
    )
    .unwrap();
    let out = pcp(&["settle", "hour.toml"], dir.path());
    let stdout = stdout_of(&out);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "consumer_id,case,l_e,l_r,payment");
    assert_eq!(lines[1], "c000,1b,30.000000,40.000000,1133.33");
    assert_eq!(lines[2], "c001,1b,30.000000,35.000000,1016.67");
    assert_eq!(lines[3], "c002,3b,40.000000,35.000000,1050.00");
    assert_eq!(lines[4], "total 3200.00");
}

#[test]
fn settle_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("hour.toml"),
        "effective = [10.0, 20.0]\n\
         realtime = [10.0, 20.0]\n\
         day_ahead = 25.0\n\
         real_time = 30.0\n\
         consumer_ids = [\"north\", \"south\"]\n",
    )
    .unwrap();
    let out = pcp(&["settle", "hour.toml", "--out", "table.csv"], dir.path());
    stdout_of(&out);
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert!(table.starts_with("consumer_id,case,l_e,l_r,payment\n"));
    assert!(table.contains("north,balanced,10.000000,10.000000,250.00"));
}

#[test]
fn synth_then_forecast_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcp(
        &["synth", "--consumers", "3", "--hours", "840", "--seed", "7"],
        dir.path(),
    );
    stdout_of(&out);
    assert!(dir.path().join("prices.csv").exists());
    assert!(dir.path().join("loads.csv").exists());

    let out = pcp(
        &[
            "forecast",
            "loads.csv",
            "--lead",
            "24",
            "--mode",
            "fixed",
            "--out",
            "forecast.csv",
        ],
        dir.path(),
    );
    let stdout = stdout_of(&out);
    assert!(
        stdout.starts_with("mape 0."),
        "expected mape summary, got: {stdout}"
    );
    assert!(stdout.contains("(lead 24, fixed,"));
    let table = std::fs::read_to_string(dir.path().join("forecast.csv")).unwrap();
    assert!(table.starts_with("timestamp,actual,predicted\n"));
    // 840 - 672 training hours, minus the lead-in before the first target.
    assert_eq!(table.lines().count() - 1, 840 - 672 - 23);
}

#[test]
fn simulate_is_deterministic_and_honors_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("a")).unwrap();
    std::fs::create_dir(dir.path().join("b")).unwrap();
    let args = [
        "simulate",
        "--consumers",
        "4",
        "--hours",
        "336",
        "--rounds",
        "2",
        "--seed",
        "11",
        "--samples",
    ];
    let run = |sub: &str| {
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--out", sub]);
        stdout_of(&pcp(&a, dir.path()))
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first.replace("/a", "/x"), second.replace("/b", "/x"));
    for sub in ["a", "b"] {
        assert!(dir.path().join(sub).join("summary.csv").exists());
        assert!(dir.path().join(sub).join("confidence.csv").exists());
        assert!(dir.path().join(sub).join("samples.csv.gz").exists());
    }
    let summary_a = std::fs::read(dir.path().join("a/summary.csv")).unwrap();
    let summary_b = std::fs::read(dir.path().join("b/summary.csv")).unwrap();
    assert_eq!(summary_a, summary_b);
    assert!(String::from_utf8(summary_a)
        .unwrap()
        .starts_with("bucket,scheme,median,std,p5,p25,p75,p95\n"));
}

#[test]
fn analyze_sweep_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = pcp(&["analyze", "--mode", "sweep"], dir.path());
    stdout_of(&out);
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("counterparty_deviation,rpd,x,value")
    );
    assert!(lines.count() > 100);
}

#[test]
fn exit_codes_follow_error_taxonomy() {
    let dir = tempfile::tempdir().unwrap();

    // Missing input file: data/IO error -> 2.
    let out = pcp(&["settle", "absent.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // Domain-invalid scenario: validation error -> 1.
    std::fs::write(
        dir.path().join("bad.toml"),
        "effective = [10.0]\nrealtime = [10.0]\nday_ahead = -5.0\nreal_time = 20.0\n",
    )
    .unwrap();
    let out = pcp(&["settle", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    // Unknown flag: usage error -> 1; help -> 0.
    let out = pcp(&["settle", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = pcp(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}
