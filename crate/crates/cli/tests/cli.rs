//! End-to-end runs of the binary over the shipped scenario configs: every
//! run is replayed twice and must produce byte-identical trace files, the
//! exit codes follow the config/invariant contract, and the verify and
//! dump-dot flows round-trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stagegraph"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_to(config: &Path, out: &Path) -> Output {
    bin()
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn every_shipped_scenario_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenarios: Vec<PathBuf> = fs::read_dir(scenarios_dir())
        .expect("scenarios directory is shipped")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    scenarios.sort();
    assert!(scenarios.len() >= 9, "expected the shipped scenario set");

    for scenario in &scenarios {
        let name = scenario.file_stem().unwrap().to_string_lossy().to_string();
        let out1 = dir.path().join(format!("{name}-1"));
        let out2 = dir.path().join(format!("{name}-2"));
        let r1 = run_to(scenario, &out1);
        let r2 = run_to(scenario, &out2);
        assert!(
            r1.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&r1.stdout)
        );
        assert_eq!(r1.status.code(), r2.status.code());
        for artifact in ["trace.jsonl", "report.json"] {
            let a = fs::read(out1.join(artifact)).unwrap();
            let b = fs::read(out2.join(artifact)).unwrap();
            assert_eq!(a, b, "{name}/{artifact} differs between runs");
        }
        let g1 = out1.join("graph.json");
        if g1.exists() {
            assert_eq!(
                fs::read(&g1).unwrap(),
                fs::read(out2.join("graph.json")).unwrap(),
                "{name}/graph.json differs between runs"
            );
        }
        println!("criterion 9 (determinism): {name}: pass");
    }
}

#[test]
fn golden_trace_for_the_single_edge_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("golden");
    let r = run_to(&scenarios_dir().join("normalize_pair.json"), &out);
    assert!(r.status.success());
    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[1],
        r#"{"s":0,"case":"init","delta":[[0,0]],"new_edges":[]}"#
    );
    assert_eq!(
        lines[2],
        r#"{"s":1,"case":"fresh_even","delta":[[1,2]],"new_edges":[]}"#
    );
    assert_eq!(
        lines[3],
        r#"{"s":2,"case":"repack","de_isolated":[1],"still_isolated":[0],"delta":[[1,1],[2,3]],"new_edges":[[1,3]]}"#
    );
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let r = run_to(&bad, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(2));

    let incomplete = dir.path().join("incomplete.json");
    fs::write(&incomplete, r#"{"construction": "kforest", "horizon": 5}"#).unwrap();
    let r = run_to(&incomplete, &dir.path().join("out2"));
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn verify_suites_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gadget");
    let r = run_to(&scenarios_dir().join("gadget_psi3.json"), &out);
    assert!(r.status.success());
    let trace = out.join("trace.jsonl");

    let ok = bin()
        .args(["verify", "--trace"])
        .arg(&trace)
        .args(["--suite", "protection"])
        .output()
        .unwrap();
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );

    let unknown = bin()
        .args(["verify", "--trace"])
        .arg(&trace)
        .args(["--suite", "no-such-suite"])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    // Corrupt one stage's vertex budget: arithmetic must fail, naming a stage.
    let content = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = content.lines().map(str::to_string).collect();
    let mut record: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    let m = record["m"].as_u64().unwrap();
    record["m"] = serde_json::Value::from(m + 1);
    lines[3] = serde_json::to_string(&record).unwrap();
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let bad = bin()
        .args(["verify", "--trace"])
        .arg(&trace)
        .args(["--suite", "all"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("stage"));
}

#[test]
fn dump_dot_renders_a_stored_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pair");
    run_to(&scenarios_dir().join("normalize_pair.json"), &out);
    let r = bin()
        .args(["dump-dot", "--graph"])
        .arg(out.join("graph.json"))
        .output()
        .unwrap();
    assert!(r.status.success());
    let dot = String::from_utf8_lossy(&r.stdout);
    assert!(dot.starts_with("graph g {"));
    assert!(dot.contains("1 -- 3;"));
}
