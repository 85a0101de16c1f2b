use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shallow-learner"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["gen", "--dims", "10", "--d", "1", "--gates", "clifford", "--seed", "7", "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["problem.json", "instance.secret.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let problem: Value = serde_json::from_slice(&std::fs::read(a.join("problem.json")).unwrap()).unwrap();
    assert_eq!(problem["schema"], "v1");
    assert_eq!(problem["dims"], serde_json::json!([10]));
}

#[test]
fn gen_grid_and_product_instances() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--dims", "4", "4", "--d", "1", "--out", p(&dir.path().join("g"))]);
    assert!(o.status.success());
    let o = run(&["gen", "--dims", "8", "--d", "0", "--out", p(&dir.path().join("z"))]);
    assert!(o.status.success());
    let problem: Value = serde_json::from_slice(&std::fs::read(dir.path().join("z/problem.json")).unwrap()).unwrap();
    let layers = problem["device"]["circuit"]["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 1);
    assert!(layers[0].as_array().unwrap().iter().all(|g| g["type"] == "u1"));
}

#[test]
fn invalid_dims_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--dims", "0", "--d", "1", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["gen", "--dims", "x", "--d", "1", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn learn_then_verify_clifford_chain() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    assert!(run(&["gen", "--dims", "10", "--d", "1", "--gates", "clifford", "--seed", "3", "--out", p(&inst)]).status.success());
    let report = dir.path().join("report.json");
    let o = run(&["learn", "--problem", p(&inst.join("problem.json")), "--out", p(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["verify", "--report", p(&report), "--secret", p(&inst.join("instance.secret.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let score = json_out(&o);
    assert!(score["fidelity"].as_f64().unwrap() >= 1.0 - 1e-8);
    assert_eq!(score["consistent"], true);
}

#[test]
fn learn_refuses_secret_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["gen", "--dims", "6", "--d", "1", "--out", p(dir.path())]).status.success());
    let o = run(&["learn", "--problem", p(&dir.path().join("instance.secret.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("secret"));
    let o = run(&["test", "--problem", p(&dir.path().join("instance.secret.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ghz_is_judged_high_complexity() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["gen", "--dims", "8", "--d", "1", "--family", "ghz", "--out", p(dir.path())]).status.success());
    let o = run(&["test", "--problem", p(&dir.path().join("problem.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let rep = json_out(&o);
    assert_eq!(rep["verdict"], "high_complexity");
    assert_eq!(rep["evidence"].as_array().unwrap().last().unwrap()["outcome"]["exhaustive"], true);
}

#[test]
fn clifford_instance_is_low_complexity() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["gen", "--dims", "8", "--d", "1", "--gates", "clifford", "--seed", "1", "--out", p(dir.path())]).status.success());
    let o = run(&["test", "--problem", p(&dir.path().join("problem.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["verdict"], "low_complexity");
}

#[test]
fn covering_26_by_26() {
    let o = run(&["covering", "--dims", "26", "26", "--d", "1", "--R", "13"]);
    assert!(o.status.success());
    let v = json_out(&o);
    let val = &v["validation"];
    for cond in ["small_balls", "disjoint_layers", "covered"] {
        assert_eq!(val[cond]["passed"], true, "{cond}");
    }
    assert!(val["realized_c"].as_u64().unwrap() <= 3844);
}

#[test]
fn covering_reports_ancillas() {
    let o = run(&["covering", "--dims", "24", "--d", "1", "--R", "9", "--ancillas"]);
    assert!(o.status.success());
    let v = json_out(&o);
    assert!(v["ancillas"]["exact"].as_u64().unwrap() as f64 <= v["ancillas"]["bound"].as_f64().unwrap());
}

#[test]
fn lightcone_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    // reset on wire 1 after a gate on 0-1, then a gate on 1-2
    let id = "[[1,0],[0,0],[0,0],[0,0],[0,0],[1,0],[0,0],[0,0],[0,0],[0,0],[1,0],[0,0],[0,0],[0,0],[0,0],[1,0]]";
    let text = format!(
        r#"{{"schema":"v1","n_wires":3,"layers":[[{{"type":"u2","wires":[0,1],"matrix":{id}}}],[{{"type":"reset","wire":1}}],[{{"type":"u2","wires":[1,2],"matrix":{id}}}]]}}"#
    );
    std::fs::write(&path, text).unwrap();
    let o = run(&["lightcone", "--circuit", p(&path), "--outputs", "1", "--extract"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown input"));
    let o = run(&["lightcone", "--circuit", p(&path), "--outputs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["mask"]["reaches_input"], true);
    assert_eq!(v["mask"]["selected"], serde_json::json!([[2, 0]]));
    assert!(v["mask"]["frontier_inputs"].as_array().unwrap().iter().any(|f| f["kind"] == "input" && f["wire"] == 2));

    // output 0 only sees the first gate, whose wire 1 input is reset beforehand
    let shielded = dir.path().join("s.json");
    let text = format!(
        r#"{{"schema":"v1","n_wires":2,"layers":[[{{"type":"reset","wire":0}},{{"type":"reset","wire":1}}],[{{"type":"u2","wires":[0,1],"matrix":{id}}}]]}}"#
    );
    std::fs::write(&shielded, text).unwrap();
    let o = run(&["lightcone", "--circuit", p(&shielded), "--outputs", "0", "--extract"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_out(&o);
    assert_eq!(v["mask"]["reaches_input"], false);
    assert_eq!(v["output_wires"].as_array().unwrap().len(), 1);
}

#[test]
fn schema_errors_name_the_pointer() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["gen", "--dims", "6", "--d", "1", "--out", p(dir.path())]).status.success());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"d":1,"search":{"strategy":"clifford_enum","restarts":"many"}}"#).unwrap();
    let o = run(&["learn", "--problem", p(&dir.path().join("problem.json")), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/search/restarts"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn thread_cap_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["gen", "--dims", "8", "--d", "1", "--seed", "5", "--out", p(dir.path())]).status.success());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"d":1,"search":{"strategy":"continuous_opt","restarts":4}}"#).unwrap();
    let problem = dir.path().join("problem.json");
    let args = ["learn", "--problem", p(&problem), "--config", p(&cfg)];
    let a = bin().args(args).env("SHALLOW_LEARNER_THREADS", "1").output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}
