// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn specsyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specsyn"))
        .args(args)
        .env_remove("SPECSYN_VERIFIER")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn segment_writes_segments_in_dependency_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("segments.json");
    let o = specsyn(&["segment", "--input", s(&fixture("buffers.c")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    let text = v.to_string();
    assert!(text.find("bufs_differ").unwrap() < text.find("check_same").unwrap());
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = specsyn(&["segment", "--input", s(&dir.path().join("nope.c"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_of_range_threshold_is_a_usage_error() {
    let o = specsyn(&["vdr", "--input", s(&fixture("buffers.c")), "--t", "1.5", "--out", "-"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('t'));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(specsyn(&["synthesize", "--bogus"]).status.code(), Some(2));
}

#[test]
fn replayed_synthesis_is_deterministic_and_annotated_output_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let report = dir.path().join(format!("{name}.json"));
        let annotated = dir.path().join(format!("{name}.c"));
        let events = dir.path().join(format!("{name}.jsonl"));
        let o = specsyn(&[
            "synthesize",
            "--input",
            s(&fixture("buffers.c")),
            "--config",
            s(&fixture("buffers.toml")),
            "--replay",
            s(&fixture("buffers.jsonl")),
            "--deterministic",
            "--out",
            s(&report),
            "--annotated",
            s(&annotated),
            "--events",
            s(&events),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (report, annotated, events)
    };
    let (r1, annotated, events) = run("a");
    let (r2, _, _) = run("b");
    let strip = |p: &Path| {
        let mut v = json(p);
        v.as_object_mut().unwrap().remove("run");
        v.as_object_mut().unwrap().remove("input");
        v
    };
    assert_eq!(strip(&r1), strip(&r2));
    assert!(std::fs::read_to_string(&events).unwrap().lines().count() > 0);

    let text = std::fs::read_to_string(&annotated).unwrap();
    assert!(!text.contains("SPSN_"));
    assert!(text.contains("loop invariant"));
    let verdicts = dir.path().join("verdicts.json");
    let o = specsyn(&["verify", "--input", s(&annotated), "--out", s(&verdicts)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&verdicts);
    assert_eq!(v["proved"], v["total"]);
    let assert_row = v["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["clause"].as_str().unwrap().starts_with("assert"))
        .expect("the assertion is checked");
    assert_eq!(assert_row["status"], "Proved");
}

#[test]
fn unannotated_assert_is_not_proved() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let o = specsyn(&["verify", "--input", s(&fixture("buffers.c")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&out)["proved"], 0);
}
