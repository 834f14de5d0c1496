//! End-to-end smoke tests of the binary: generate, solve, round, verify,
//! and the determinism guarantee on run records.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sospath"))
}

fn tmp(name: &str) -> PathBuf {
    let mut dir = std::env::temp_dir();
    dir.push(format!("sospath-cli-{}-{name}", std::process::id()));
    dir
}

#[test]
fn gen_solve_roundtrip() {
    let instance = tmp("tightness.json");
    let out = bin()
        .args(["gen", "tightness", "--h", "1", "--n", "3"])
        .arg("--out")
        .arg(&instance)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let pe_path = tmp("pe.json");
    let run = |seed: &str| -> serde_json::Value {
        let out = bin()
            .args(["solve", "--p", "2", "--seed", seed])
            .arg("--instance")
            .arg(&instance)
            .arg("--dump-pe")
            .arg(&pe_path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let record = run("7");
    assert_eq!(record["algorithm"], "sp");
    assert_eq!(record["status"], "Converged");
    // Optimal path takes the three zero edges.
    assert_eq!(record["opt_cost"], "0");

    // Byte-identical records modulo the timing field.
    let mut a = run("7");
    let mut b = run("7");
    a["timing_ms"] = 0.into();
    b["timing_ms"] = 0.into();
    assert_eq!(a, b);

    // Rounding from the dumped pseudo-expectation.
    let out = bin()
        .args(["round", "--p", "2", "--trials", "3", "--seed", "5"])
        .arg("--instance")
        .arg(&instance)
        .arg("--pe")
        .arg(&pe_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("best: cost"));
}

#[test]
fn multi_instance_solve_keeps_argument_order() {
    let a = tmp("multi-a.json");
    let b = tmp("multi-b.json");
    for (path, n) in [(&a, "2"), (&b, "3")] {
        let out = bin()
            .args(["gen", "tightness", "--h", "1", "--n", n])
            .arg("--out")
            .arg(path)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let out = bin()
        .args(["solve", "--p", "2", "--seed", "1"])
        .arg("--instance")
        .arg(&a)
        .arg("--instance")
        .arg(&b)
        .env("SOSPATH_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["instance"].as_str().unwrap().contains("multi-a"));
    assert!(lines[1]["instance"].as_str().unwrap().contains("multi-b"));
}

#[test]
fn verify_bell_suite_passes() {
    let out = bin()
        .args(["verify", "--suite", "bell", "--json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed[0]["pass"], true);
}

#[test]
fn bell_table_prints_csv() {
    let out = bin().args(["bell", "--dmax", "2", "--pmax", "4"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("2,1,1,3,12,60"));
}

#[test]
fn gen_counterexample_and_unknown_suite() {
    let path = tmp("ce.json");
    let out = bin()
        .args(["gen", "dijkstra-ce", "--n", "8", "--eps", "0.1"])
        .arg("--out")
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let parsed: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(parsed["n"], 9);
    assert_eq!(parsed["l"], 9);

    let out = bin().args(["verify", "--suite", "nope"]).output().unwrap();
    assert!(!out.status.success());
}
