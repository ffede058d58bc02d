use std::path::Path;
use std::process::{Command, Output};

fn stix(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stix"))
        .args(args)
        .current_dir(dir)
        .env_remove("STIX_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_build_workload_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&stix(&["gen", "--out", "data.csv", "--count", "3000", "--vocab", "60", "--seed", "5"], d));
    ok(&stix(&["build", "--index", "rsmi-bm-ir2", "--data", "data.csv", "--out", "idx.stix", "--epochs", "40"], d));
    ok(&stix(&["workload", "--data", "data.csv", "--out", "w.jsonl", "--queries", "25", "--keywords", "2"], d));
    assert_eq!(std::fs::read_to_string(d.join("w.jsonl")).unwrap().lines().count(), 25);

    let knn = ok(&stix(&["query", "--index", "idx.stix", "--workload", "w.jsonl", "--k", "4"], d));
    assert_eq!(knn.lines().count(), 25);
    for line in knn.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["ids"].as_array().unwrap().len() <= 4);
    }

    let csv = ok(&stix(
        &["query", "--index", "idx.stix", "--at", "0.5,0.5", "--keywords", "kw0", "--window-frac", "0.2", "--format", "csv"],
        d,
    ));
    assert!(csv.starts_with("query,rank,id,distance"));

    let none = ok(&stix(&["query", "--index", "idx.stix", "--at", "0.5,0.5", "--keywords", "no-such-word", "--k", "3"], d));
    assert_eq!(none.trim(), r#"{"query":0,"ids":[],"distances":[]}"#);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = |seed: Option<&str>, out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_stix"));
        cmd.args(["gen", "--out", out, "--count", "50"]).current_dir(d).env_remove("STIX_SEED");
        if let Some(s) = seed {
            cmd.env("STIX_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read_to_string(d.join(out)).unwrap()
    };
    let a = gen(Some("9"), "a.csv");
    let b = gen(Some("9"), "b.csv");
    let c = gen(None, "c.csv");
    ok(&stix(&["gen", "--out", "e.csv", "--count", "50", "--seed", "9"], d));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a, std::fs::read_to_string(d.join("e.csv")).unwrap());
}

#[test]
fn bench_reports_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = stix(
        &[
            "bench", "--count", "2000", "--vocab", "40", "--queries", "20", "--epochs", "20", "--index", "ir2,rsmi-bm",
            "--window-frac", "0.05,0.1", "--k", "5", "--keywords", "1,2", "--parallel-queries",
        ],
        dir.path(),
    );
    let text = ok(&out);
    assert_eq!(text.lines().count(), 2 * 2 * 3);
    let row: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(row["schema_version"], 1);
    assert_eq!(row["variant"], "ir2");
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "1,0,0,a\n2,x,0,b\n").unwrap();
    let out = stix(&["build", "--index", "ir2", "--data", "bad.csv", "--out", "i.stix"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:2"));

    let out = stix(&["query", "--index", "bad.csv", "--at", "0,0", "--k", "1"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    assert!(!stix(&["build", "--index", "btree", "--data", "bad.csv", "--out", "i"], d).status.success());
    assert!(!stix(&["bench", "--count", "100", "--format", "xml"], d).status.success());
}
