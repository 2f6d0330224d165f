use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use grade_crossing::cli::{cmd_batch, cmd_run, cmd_verify};
use grade_crossing::controller::ControllerKind;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.scn"))
}

struct Output {
    status: i32,
    out: String,
    err: String,
}

fn run(path: &Path, trace: Option<&Path>, kind: ControllerKind) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let status = cmd_run(path, trace, kind, &mut out, &mut err);
    Output {
        status,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn verify(path: &Path) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let status = cmd_verify(path, &mut out, &mut err);
    Output {
        status,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn batch(path: &Path, seeds: u64, report: &Path) -> (i32, String) {
    let status = cmd_batch(
        path,
        seeds,
        Some(report),
        ControllerKind::Correct,
        &mut Vec::new(),
        &mut Vec::new(),
    );
    (status, fs::read_to_string(report).unwrap())
}

fn total_field(report: &str, key: &str) -> String {
    let total = report.lines().last().unwrap();
    total
        .split('\t')
        .find_map(|f| f.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from {total}"))
        .to_string()
}

#[test]
fn fault_free_single_train_run_is_clean() {
    let o = run(&scenario("single_train"), None, ControllerKind::Correct);
    assert_eq!(o.status, 0, "{}", o.err);
    assert!(o.out.contains("collisions=0"), "{}", o.out);
    assert!(o.out.contains("trains_served=1"), "{}", o.out);
}

#[test]
fn always_open_with_overlapping_vehicle_exits_2() {
    let o = run(
        &scenario("crossing_vehicle"),
        None,
        ControllerKind::AlwaysOpen,
    );
    assert_eq!(o.status, 2, "{}", o.out);
    assert!(o.out.contains("collisions=1"));
}

#[test]
fn missing_scenario_exits_1() {
    let o = run(
        Path::new("/nonexistent/x.scn"),
        None,
        ControllerKind::Correct,
    );
    assert_eq!(o.status, 1);
    assert!(o.err.contains("x.scn"));
}

#[test]
fn parse_error_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.scn");
    fs::write(&p, "[layout]\ntracks = 2\nsensor_offset_m = far\n").unwrap();
    let o = run(&p, None, ControllerKind::Correct);
    assert_eq!(o.status, 1);
    assert!(o.err.contains("line 3"), "{}", o.err);
}

#[test]
fn alarm_without_collision_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("full.scn");
    let text =
        fs::read_to_string(scenario("two_tracks")).unwrap() + "\n[controller]\nmemory_slots = 1\n";
    fs::write(&p, text).unwrap();
    let o = run(&p, None, ControllerKind::Correct);
    assert_eq!(o.status, 3, "{}", o.out);
    assert!(o.out.contains("alarm=memory-overflow:2"), "{}", o.out);
}

#[test]
fn run_trace_verifies() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["single_train", "two_tracks", "crossing_vehicle"] {
        let trace = dir.path().join(format!("{name}.trace"));
        assert_eq!(
            run(&scenario(name), Some(&trace), ControllerKind::Correct).status,
            0
        );
        let v = verify(&trace);
        assert_eq!(v.status, 0, "{name}: {}", v.out);
    }
}

#[test]
fn empty_trace_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.trace");
    fs::write(&p, "").unwrap();
    assert_eq!(verify(&p).status, 0);
}

#[test]
fn hand_edited_trace_names_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    run(
        &scenario("single_train"),
        Some(&trace),
        ControllerKind::Correct,
    );
    let text = fs::read_to_string(&trace).unwrap();
    let mut edited = String::new();
    let mut stamp = None;
    for line in text.lines() {
        if stamp.is_none() && line.contains("\tstep\t") && line.contains("oracle=1") {
            stamp = Some(line.split('\t').next().unwrap().to_string());
            edited.push_str(&line.replace("gate_cmd=close", "gate_cmd=open"));
        } else {
            edited.push_str(line);
        }
        edited.push('\n');
    }
    fs::write(&trace, edited).unwrap();
    let stamp = stamp.expect("trace has an occupied step");
    let v = verify(&trace);
    assert_ne!(v.status, 0);
    assert!(v.out.contains(&format!("t={stamp}")), "{}", v.out);
}

#[test]
fn malformed_trace_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.trace");
    run(
        &scenario("single_train"),
        Some(&trace),
        ControllerKind::Correct,
    );
    let mut lines: Vec<String> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[4] = lines[4].replace("gate_pos=", "gate_position=");
    fs::write(&trace, lines.join("\n")).unwrap();
    let v = verify(&trace);
    assert_eq!(v.status, 1);
    assert!(v.err.contains("line 5"), "{}", v.err);
}

#[test]
fn one_seed_batch_has_one_verdict_line() {
    let dir = tempfile::tempdir().unwrap();
    let (status, report) = batch(&scenario("batch_template"), 1, &dir.path().join("r"));
    assert_eq!(status, 0);
    assert_eq!(report.lines().filter(|l| l.starts_with("seed=")).count(), 1);
    assert_eq!(total_field(&report, "collisions"), "0");
}

#[test]
fn lossy_batch_is_safe_but_reopens_later() {
    let dir = tempfile::tempdir().unwrap();
    let (status, clean) = batch(&scenario("batch_template"), 200, &dir.path().join("a"));
    assert_eq!(status, 0);
    let (status, lossy) = batch(&scenario("lossy_template"), 200, &dir.path().join("b"));
    assert_eq!(status, 0);
    assert_eq!(total_field(&lossy, "collisions"), "0");
    let clean_max: f64 = total_field(&clean, "max_reopen_latency_s").parse().unwrap();
    let lossy_max: f64 = total_field(&lossy, "max_reopen_latency_s").parse().unwrap();
    assert!(lossy_max > clean_max, "{lossy_max} vs {clean_max}");
    assert!(total_field(&lossy, "anomalies").contains("unknown-tail"));
}

#[test]
fn binary_honours_exit_codes_and_global_flag() {
    let bin = env!("CARGO_BIN_EXE_grade-crossing");
    let clean = Command::new(bin)
        .args(["run"])
        .arg(scenario("single_train"))
        .output()
        .unwrap();
    assert_eq!(clean.status.code(), Some(0));
    let out = Command::new(bin)
        .arg("--faulty-controller=always-open")
        .arg("run")
        .arg(scenario("crossing_vehicle"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("collisions=1"));
    let missing = Command::new(bin)
        .args(["verify", "/nonexistent/trace"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}
