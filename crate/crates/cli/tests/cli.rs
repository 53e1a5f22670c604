use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ceg_core::fixtures::F1_EDGES;

fn ceg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().to_path_buf();
    fs::write(p.join("f1.txt"), F1_EDGES).unwrap();
    fs::write(p.join("q3p.q"), "a1 -A-> a2\na2 -B-> a3\na3 -C-> a4\n").unwrap();
    fs::write(p.join("edge.q"), "x -A-> y\n").unwrap();
    (dir, p)
}

#[test]
fn estimate_single_edge_every_method() {
    let (_d, p) = setup();
    let o = ceg(&p, &["estimate", "--graph", "f1.txt", "edge.q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).filter(|l| !l.starts_with("trueCount")).collect();
    assert_eq!(rows.len(), 21);
    for r in rows {
        assert_eq!(r.split('\t').nth(1), Some("4"), "{r}");
    }
}

#[test]
fn eval_f1_reports_six_against_seven() {
    let (_d, p) = setup();
    let o = ceg(&p, &["eval", "--graph", "f1.txt", "--workload", "q3p.q", "--methods", "all", "--out", "res"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(p.join("res/results.csv")).unwrap();
    let hit = csv.lines().any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[2] == "O/max-hop-max-aggr" && f[7] == "7" && f[8] == "6.0"
    });
    assert!(hit, "{csv}");
    let summary = fs::read_to_string(p.join("res/summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["queries"], 1);
    assert_eq!(v["seed"], 0);
}

#[test]
fn gen_workload_is_reproducible() {
    let (_d, p) = setup();
    fs::write(p.join("t.txt"), "template path2\na -?-> b\nb -?-> c\n").unwrap();
    let args = ["gen-workload", "--graph", "f1.txt", "--templates", "t.txt", "--per-template", "5", "--seed", "9"];
    let a = ceg(&p, &args);
    let b = ceg(&p, &args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("query path2-0 path2"));
}

#[test]
fn catalogue_round_trip_through_files() {
    let (_d, p) = setup();
    let o = ceg(&p, &["build-catalogue", "--graph", "f1.txt", "--workload", "q3p.q", "--out", "cat.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = ceg(&p, &["estimate", "--catalogue", "cat.json", "--methods", "O", "q3p.q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().skip(1).all(|l| l.split('\t').nth(1) == Some("6")));
}

#[test]
fn oracle_count_prints_exact_count() {
    let (_d, p) = setup();
    let o = ceg(&p, &["oracle-count", "--graph", "f1.txt", "q3p.q"]);
    assert_eq!(stdout(&o), "7\n");
}

#[test]
fn config_file_supplies_flags() {
    let (_d, p) = setup();
    fs::write(p.join("run.conf"), "graph = f1.txt\nmethods = molp\nh = 2\n").unwrap();
    let o = ceg(&p, &["estimate", "--config", "run.conf", "q3p.q"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("molp\t8"));
    fs::write(p.join("bad.conf"), "colour = blue\n").unwrap();
    assert_eq!(ceg(&p, &["estimate", "--config", "bad.conf", "q3p.q"]).status.code(), Some(2));
}

#[test]
fn distinct_exit_codes() {
    let (_d, p) = setup();
    // missing statistics: catalogue built for another query
    ceg(&p, &["build-catalogue", "--graph", "f1.txt", "--workload", "edge.q", "--out", "small.json"]);
    let o = ceg(&p, &["estimate", "--catalogue", "small.json", "--methods", "O", "q3p.q"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing statistic"));

    // malformed inputs
    fs::write(p.join("bad.txt"), "1 2\n").unwrap();
    let o = ceg(&p, &["oracle-count", "--graph", "bad.txt", "q3p.q"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    fs::write(p.join("cat.json"), "{\"version\": 99}").unwrap();
    assert_eq!(ceg(&p, &["estimate", "--catalogue", "cat.json", "q3p.q"]).status.code(), Some(3));

    // incompatible sketch budget: two partition attributes, K not a square
    let o = ceg(&p, &["estimate", "--graph", "f1.txt", "--sketch-k", "8", "--methods", "O/max-hop-max", "q3p.q"]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));

    // I/O
    assert_eq!(ceg(&p, &["oracle-count", "--graph", "nope.txt", "q3p.q"]).status.code(), Some(6));

    // usage
    assert_eq!(ceg(&p, &["estimate"]).status.code(), Some(2));
}

#[test]
fn dump_ceg_writes_dot_files() {
    let (_d, p) = setup();
    let o = ceg(&p, &["estimate", "--graph", "f1.txt", "--dump-ceg", "dot", "--methods", "O,molp", "q3p.q"]);
    assert!(o.status.success());
    let dot = fs::read_to_string(p.join("dot/ceg_O.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(p.join("dot/ceg_M.dot").exists());
}

#[test]
fn eval_sketched_run_keeps_going() {
    let (_d, p) = setup();
    let o = ceg(
        &p,
        &["eval", "--graph", "f1.txt", "--workload", "q3p.q", "--methods", "molp,O/max-hop-max", "--sketch-k", "4", "--out", "sk"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(p.join("sk/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(6) == Some("4")));
}
