use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gaslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gaslab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn last_json(stdout: &str) -> Value {
    serde_json::from_str(stdout.lines().last().unwrap()).unwrap()
}

fn core_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn assemble_then_disassemble() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("p.easm");
    std::fs::write(&src, "PUSH1 0x01\nPUSH1 0x00\nSLOAD\nADD\nSTOP\n").unwrap();
    let hex = ok(&["assemble", p(&src)]);
    assert_eq!(hex.trim(), "0x60016000540100");
    let text = ok(&["disassemble", hex.trim()]);
    assert!(text.contains("SLOAD"));
}

#[test]
fn estimate_oracle_and_intervals_on_discontinuity() {
    let code = core_file("corpus/discontinuity_30000_60000.easm");
    let args = |cmd: &'static str| vec![cmd, "--code", p(&code), "--block-gas-limit", "100000"];
    let est = last_json(&ok(&args("estimate")));
    assert_eq!(est["estimate"], 81000);
    let oracle = last_json(&ok(&args("oracle")));
    assert_eq!(oracle["estimate"], 21036);
    let intervals = ok(&args("intervals"));
    assert!(intervals.contains("21036") && intervals.contains("81000"), "{intervals}");
}

#[test]
fn run_reports_refund() {
    let code = core_file("corpus/clear_slot.easm");
    let out = last_json(&ok(&["run", "--code", p(&code), "--gas", "100000"]));
    assert_eq!(out["z"], 1);
    assert_eq!(out["gas_used"], 21206);
    assert_eq!(out["refund"], 4800);
}

#[test]
fn evaluate_writes_reports_that_convert() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = core_file("scenarios/synthetic.json");
    let (csv, json, metrics) = (
        dir.path().join("r.csv"),
        dir.path().join("r.json"),
        dir.path().join("m.csv"),
    );
    ok(&[
        "evaluate",
        "--scenario",
        p(&scenario),
        "--deltas",
        "1,6",
        "--estimators",
        "EstimateGas,TraceCall",
        "--out",
        p(&csv),
        "--metrics",
        p(&metrics),
    ]);
    let header = std::fs::read_to_string(&metrics).unwrap();
    assert!(header.starts_with("estimator,delta,dataset,n,median_ape,mean_ape,std_ape,r2"));
    ok(&["report-convert", p(&csv), p(&json)]);
    let back = dir.path().join("back.csv");
    ok(&["report-convert", p(&json), p(&back)]);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        std::fs::read_to_string(&back).unwrap()
    );
}

#[test]
fn strict_scenario_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(core_file("scenarios/synthetic.json")).unwrap()).unwrap();
    doc["colour"] = Value::from("blue");
    let path = dir.path().join("s.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let strict = gaslab(&["estimate", "--scenario", p(&path), "--tx", "tx0001"]);
    assert!(!strict.status.success());
    assert!(String::from_utf8_lossy(&strict.stderr).contains("colour"));
    ok(&["estimate", "--scenario", p(&path), "--tx", "tx0001", "--lenient"]);
}

#[test]
fn synth_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    ok(&["synth", "--out", p(&out)]);
    let bundled: Value =
        serde_json::from_str(&std::fs::read_to_string(core_file("scenarios/synthetic.json")).unwrap()).unwrap();
    let fresh: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(bundled, fresh);
}
