use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn qsgain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsgain")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn stable_opa_is_certified() {
    let out = qsgain(&[
        "certify",
        &data("opa_stable.json"),
        "--uncertainty",
        &data("opa_stable_uncertainty.json"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "certified");
    let hinf = v["hinf"].as_f64().unwrap();
    assert!((hinf - 2.0 * 2.0 / (4.0 - 0.04)).abs() < 1e-8);
    assert!(v["c_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn unstable_opa_exits_one() {
    let out = qsgain(&["certify", &data("opa_unstable.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdict"], "not-hurwitz");
}

#[test]
fn violated_gain_exits_one() {
    let out = qsgain(&[
        "certify",
        &data("opa_violated.json"),
        "--uncertainty",
        &data("opa_violated_uncertainty.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdict"], "gain-violated");
}

#[test]
fn explicit_gain_flags() {
    let model = data("opa_stable.json");
    let ok = qsgain(&["certify", &model, "--gamma", "50", "--delta1", "0.04"]);
    assert_eq!(ok.status.code(), Some(0));
    let tight = qsgain(&["certify", &model, "--gamma", "1"]);
    assert_eq!(tight.status.code(), Some(1));
}

#[test]
fn errors_exit_two_with_message() {
    let missing = qsgain(&["certify", "/nonexistent/model.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("model.json"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n_a\": 1,\n \"n_b\": }").unwrap();
    let out = qsgain(&["certify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(qsgain(&["certify"]).status.code(), Some(2));
    assert_eq!(qsgain(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn freqresp_csv() {
    let out = qsgain(&["freqresp", &data("opa_stable.json"), "--points", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(reader.headers().unwrap(), vec!["omega", "re", "im", "magnitude"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let re: f64 = r[1].parse().unwrap();
        let im: f64 = r[2].parse().unwrap();
        let mag: f64 = r[3].parse().unwrap();
        assert!((re.hypot(im) - mag).abs() <= 1e-14 * mag.max(1.0));
    }
}

#[test]
fn uncertainty_parameters() {
    let out = qsgain(&["uncertainty", "--coupling", "0.2,0", "--kappa-b", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["gamma"].as_f64().unwrap() - 50.0).abs() < 1e-6);
    assert!((v["delta1"].as_f64().unwrap() - 0.04).abs() < 1e-12);

    let file = qsgain(&["uncertainty", "--file", &data("opa_stable_uncertainty.json")]);
    assert_eq!(file.stdout, out.stdout);
}

#[test]
fn moments_within_bound() {
    let out = qsgain(&["moments", &data("opa_stable.json"), "--coupling", "0.2,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["ms_value"].as_f64().unwrap() <= v["c_bound"].as_f64().unwrap());
    assert_eq!(v["satisfied"], true);
}

#[test]
fn opa_sweep_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let out = qsgain(&["opa", "--sweep", "25", "--seed", "9", "--csv", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(reader.records().count(), 25);
}

#[test]
fn fockcheck_passes() {
    let out = qsgain(&["fockcheck", "--dim", "20", "--trials", "2", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["mu_multiplier"].as_f64(), Some(2.0));
}

#[test]
fn reports_are_byte_identical() {
    for args in [
        vec!["opa", "--sweep", "30", "--seed", "2"],
        vec!["fockcheck", "--dim", "20", "--seed", "3", "--trials", "2", "--format", "json"],
    ] {
        let a = qsgain(&args);
        let b = qsgain(&args);
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(a.status, b.status);
    }
}
