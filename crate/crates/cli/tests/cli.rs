use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tlevel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlevel"))
        .args(args)
        .current_dir(dir)
        .env("TLEVEL_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const EXAMPLE_AUCTION: &str = r#"{"thresholds":[[2,4,6,8],[1.5,5,9,10],[1.7,3.9,6,7]],"tie_order":[1,2,3],"env":{"kind":"single_item"}}"#;

#[test]
fn simulate_replays_sample_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.json"), EXAMPLE_AUCTION).unwrap();
    fs::write(d.join("s.csv"), "bidder_0,bidder_1,bidder_2\n3,1,1\n5,1,1\n").unwrap();
    let o = tlevel(&["simulate", "--auction", "a.json", "--samples", "s.csv"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "bidder_0,bidder_1,bidder_2,winners,payment_0,payment_1,payment_2,revenue");
    assert_eq!(lines[1], "3,1,1,1,2,0,0,2");
    assert_eq!(lines[2], "5,1,1,1,2,0,0,2");
}

#[test]
fn build_levels_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("prior.json"), r#"{"bidders":[{"kind":"uniform","lo":1,"hi":2}],"n":2}"#).unwrap();
    fs::write(d.join("params.json"), r#"{"kind":"bounded","epsilon":0.25}"#).unwrap();
    let o = tlevel(&["build-levels", "--prior", "prior.json", "--params", "params.json", "--out", "a.json", "--report"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("bidder"));
    let o = tlevel(&["eval", "--auction", "a.json", "--prior", "prior.json", "--mc", "20000", "--seed", "3"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mean = v["mean"].as_f64().unwrap();
    assert!(mean > 0.75 * 4.0 / 3.0 && mean < 1.5, "{mean}");
}

#[test]
fn learn_writes_auction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("s.csv"), "bidder_0\n0.2\n0.6\n0.7\n0.9\n").unwrap();
    let o = tlevel(&["learn", "--samples", "s.csv", "--t", "1", "--seed", "1", "--out", "a.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a.json")).unwrap()).unwrap();
    assert_eq!(v["thresholds"][0][0].as_f64(), Some(0.6));
}

#[test]
fn shatter_instance_and_plan() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("i.json"), r#"{"samples":[[1.0],[3.0]],"targets":[0.5,2.0],"t":1}"#).unwrap();
    let o = tlevel(&["shatter", "--instance", "i.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let count = v["count"].as_u64().unwrap();
    assert!((1..=4).contains(&count));
    assert_eq!(v["shatterable"], count == 4);
    assert_eq!(v["within_ceiling"], true);

    let o = tlevel(&["plan", "--h", "1", "--epsilon", "0.1", "--delta", "0.05"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pseudo_dim"], 1);
    assert_eq!(v["samples"], 530);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("bad.json"),
        r#"{"prior":{"bidders":[{"kind":"uniform","lo":0,"hi":1}]},"candidate":{"kind":"bounded","epsilon":0.2},"mc_samples":5,"seed":1}"#,
    )
    .unwrap();
    let o = tlevel(&["report", "--config", "bad.json"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mc_samples"), "{}", stderr(&o));

    let o = tlevel(&["shatter", "--probe", "--n", "3", "--t", "3", "--max-m", "22"], d);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    // A reserve above the support never sells.
    fs::write(d.join("a.json"), r#"{"thresholds":[[5.0]],"env":{"kind":"single_item"}}"#).unwrap();
    fs::write(
        d.join("fail.json"),
        r#"{"prior":{"bidders":[{"kind":"uniform","lo":0,"hi":1}]},"candidate":{"kind":"auction","path":"a.json","min_ratio":0.5},"mc_samples":1000,"seed":1}"#,
    )
    .unwrap();
    let o = tlevel(&["report", "--config", "fail.json"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = tlevel(&["report", "--config", "fail.json", "--assert"], d);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    fs::write(
        d.join("phi.json"),
        r#"{"prior":{"bidders":[{"kind":"uniform","lo":0,"hi":1}]},"env":{"kind":"explicit","sets":[[],[1]]},"candidate":{"kind":"phi_grid","epsilon":0.2},"mc_samples":1000,"seed":1,"outputs":{"report":"r.json","csv":"r.csv"}}"#,
    )
    .unwrap();
    let o = tlevel(&["report", "--config", "phi.json", "--assert"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.join("r.json").exists());
    assert_eq!(fs::read_to_string(d.join("r.csv")).unwrap().lines().count(), 2);

    let o = tlevel(&["eval", "--auction", "missing.json", "--prior", "phi.json", "--seed", "1"], d);
    assert_eq!(o.status.code(), Some(2));
}
