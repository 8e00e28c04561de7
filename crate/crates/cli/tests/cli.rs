//! Drives the installed `gwshape` binary end to end: exit codes, stderr
//! diagnostics, and the files each subcommand leaves behind.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gwshape_cli::report::EXPERIMENT_CSV_HEADER;

fn gwshape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwshape"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_owned()
}

const GOOD_POLICY: &str =
    "group heavy 70 src 10.0.0.1\ngroup light 30 src 10.0.0.2\ndefault light\n";

const GOOD_SCENARIO: &str = "\
station a 10.0.0.1
station b 10.0.0.2
server srv 192.168.1.1
link lan 10000000
link wan 10000000
placement outgoing
classify_cost 5
seed 3
duration 2
source bulk a srv size 1500 window 8 port 21
source bulk b srv size 1500 window 8 port 21
group heavy 70 src 10.0.0.1
group light 30 src 10.0.0.2
default light
";

#[test]
fn validate_accepts_a_good_policy() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "good.policy", GOOD_POLICY);
    let out = gwshape(&["validate", "--policy", &path]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("ok: 2 groups (by-address)"), "{stdout}");
    assert!(stdout.contains("heavy 70%"), "{stdout}");
}

#[test]
fn validate_reports_every_defect_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // Share sum 120 and a bad default name: two independent defects.
    let path = write(
        dir.path(),
        "bad.policy",
        "group a 60 src 10.0.0.1\ngroup b 60 src 10.0.0.2\ndefault nosuch\n",
    );
    let out = gwshape(&["validate", "--policy", &path]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("error:"), "{stderr}");
}

#[test]
fn missing_files_exit_two() {
    let out = gwshape(&["validate", "--policy", "/nonexistent/x.policy"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let out = gwshape(&["simulate", "--scenario", "/nonexistent/x.scenario"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn simulate_writes_report_trace_and_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "mix.scenario", GOOD_SCENARIO);
    let out_dir = dir.path().join("results");
    let out = gwshape(&[
        "simulate",
        "--scenario",
        &scenario,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("time_us,kind,flow_id,group,size\n"));
    assert!(trace.lines().count() > 100);

    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report.contains("# measured bound: outgoing"));
    assert!(report.contains("group,heavy,"));
    assert!(report.contains("flow,bulk a->srv #0,"));

    let timeline = fs::read_to_string(out_dir.join("timeline.dat")).unwrap();
    assert_eq!(timeline.lines().count(), 3, "{timeline:?}"); // header + 2 seconds

    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("utilization"), "{stdout}");
}

#[test]
fn simulate_rejects_a_semantically_broken_scenario() {
    let dir = tempfile::tempdir().unwrap();
    // Placement names a bound but no policy follows.
    let scenario = write(
        dir.path(),
        "broken.scenario",
        "station a 10.0.0.1\nserver srv 192.168.1.1\nplacement outgoing\n\
         duration 1\nsource bulk a srv size 1500 window 8 port 21 start 0\n",
    );
    let out = gwshape(&["simulate", "--scenario", &scenario, "--out", "unused"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(!Path::new("unused").exists());
}

#[test]
fn run_writes_deterministic_experiment_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "run".to_owned(),
            "--experiment".into(),
            "1".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            out.to_owned(),
            "--set".into(),
            "x=50".into(),
            "--set".into(),
            "duration=1.5".into(),
        ]
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let argv = args(out_dir.to_str().unwrap());
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = gwshape(&argv);
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("experiment 1: 3 variants"), "{stdout}");
        assert!(stdout.contains("disabled"), "{stdout}");
    }
    let csv_a = fs::read_to_string(out_a.join("exp1.csv")).unwrap();
    let csv_b = fs::read_to_string(out_b.join("exp1.csv")).unwrap();
    assert!(csv_a.starts_with(EXPERIMENT_CSV_HEADER));
    assert_eq!(csv_a, csv_b, "same seed must rewrite the same bytes");
    assert!(out_a.join("exp1.dat").exists());
}

#[test]
fn run_rejects_bad_experiment_ids_and_unknown_keys() {
    let out = gwshape(&["run", "--experiment", "9"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unknown experiment 9"), "{stderr}");

    let out = gwshape(&["run", "--experiment", "1", "--set", "windowsize=9"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unknown parameter"), "{stderr}");
}
