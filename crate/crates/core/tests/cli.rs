use std::path::Path;
use std::process::{Command, Output};

use epimu::fixtures::{FIG1, INCOMPARABLE_OBS};

fn epimu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epimu")).args(args).output().expect("run epimu")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn check_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "fig1.mas", FIG1);
    assert_eq!(epimu(&["check", "--model", &m, "--formula", "K[a] p1"]).status.code(), Some(0));
    assert_eq!(epimu(&["check", "--model", &m, "--formula", "AX AX false"]).status.code(), Some(1));
    let bad = write(d.path(), "bad.mas", "agents: a\natoms: p\nstates: 2\ninit: 1\ntrans: 1=>2\n");
    let o = epimu(&["check", "--model", &bad, "--formula", "p"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    let dead = write(d.path(), "dead.mas", "agents: a\natoms: p\nstates: 2\ninit: 1\ntrans: 1->2\n");
    let o = epimu(&["check", "--model", &dead, "--formula", "p"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("state 2 has no successor"), "{}", stderr(&o));
    let o = epimu(&["check", "--model", &m, "--formula", "EX Z"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn formula_from_file() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "fig1.mas", FIG1);
    let f = write(d.path(), "f.muk", "# knowledge of a reachable p1\nK[a] (EF p1)\n");
    let o = epimu(&["check", "--model", &m, "--formula", &f, "--json", "--witness-sets"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], true);
    assert_eq!(v["root_model_size"], 5);
    assert_eq!(v["per_init"]["1"], true);
    assert!(v["ins_trace"].as_array().unwrap().len() >= 3);
    assert!(v["witness_sets"]["e"]["states"].is_array());
}

#[test]
fn mixing_formula_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "two.mas", INCOMPARABLE_OBS);
    let o = epimu(&["check", "--model", &m, "--formula", "nu Z. (q & K[a] Z | K[b] Z)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("non-mixing violation at node"), "{}", stderr(&o));
    let o = epimu(&["nonmixing", "--model", &m, "--formula", "nu Z. (q & K[a] Z | K[b] Z)", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["nonmixing"], false);
    assert_eq!(v["violation"]["agent_a"], "a");
}

#[test]
fn distinguish_writes_model_and_map() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "fig1.mas", FIG1);
    let out = d.path().join("d.mas").display().to_string();
    let map = d.path().join("d.map").display().to_string();
    let o = epimu(&["distinguish", "--model", &m, "--agent", "a", "--out", &out, "--map", &map]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("5 states"));
    let dm = epimu::parse_mas(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dm.n(), 5);
    let lines = std::fs::read_to_string(&map).unwrap();
    assert_eq!(lines.lines().count(), 5);
    assert!(lines.lines().all(|l| l.contains(") -> ")));
}

#[test]
fn oracle_reports_fig1_mismatches() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "fig1.mas", FIG1);
    let o = epimu(&["oracle", "--model", &m, "--diagram", "epistemic", "--agent", "a", "--set", "1,3", "--depth", "4"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mismatches"], serde_json::json!(["1.3.3"]));
    let o = epimu(&["oracle", "--model", &m, "--formula", "mu Z. p1 | EX Z", "--depth", "5"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn hardness_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let e = write(d.path(), "e.sfx", "alphabet: a b\nF = a\nC(x) = a . x . b\nR = C(~F)\n");
    let out = d.path().join("inst");
    let o = epimu(&["gen-hard", "--expr", &e, "--out", &out.display().to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let model = out.join("model.mas").display().to_string();
    let query = out.join("query.muk").display().to_string();
    let o = epimu(&["check", "--model", &model, "--formula", &query, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["holds_any"], true);
    assert_eq!(v["per_init"]["1"], true);
    let o = epimu(&["verify-reduction", "--expr", &e, "--maxlen", "3", "--depth", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mismatches"], serde_json::json!([]));
    let bad = write(d.path(), "bad.sfx", "alphabet: a b\nR = ~(a + eps)\n");
    assert_eq!(epimu(&["gen-hard", "--expr", &bad, "--out", &out.display().to_string()]).status.code(), Some(2));
}

#[test]
fn budget_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let m = write(d.path(), "fig1.mas", FIG1);
    let o = Command::new(env!("CARGO_BIN_EXE_epimu"))
        .args(["check", "--model", &m, "--formula", "K[a] (EF p1)"])
        .env("EPIMU_BUDGET_STATES", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_epimu"))
        .args(["check", "--model", &m, "--formula", "K[a] (EF p1)", "--budget-states", "100"])
        .env("EPIMU_BUDGET_STATES", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
