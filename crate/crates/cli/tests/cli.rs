use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conic-angles"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn schema() -> jsonschema::Validator {
    let text = include_str!("../schema/report.schema.json");
    jsonschema::validator_for(&serde_json::from_str(text).unwrap()).unwrap()
}

fn rationals(v: &Value, key: &str) -> Vec<String> {
    v[key]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["rational"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn exact_orthant_table() {
    let o = run(&["exact", "orthant", "3"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(rationals(&v, "upsilon"), ["1/8", "3/8", "3/8", "1/8"]);
    assert_eq!(rationals(&v, "gamma"), ["1", "3/4", "1/4", "0"]);
    assert_eq!(v["gamma"][1]["decimal"], 0.75);
}

#[test]
fn exact_weyl_and_subspace_tables() {
    let v = json(&run(&["exact", "weyl-b", "2"]));
    assert_eq!(rationals(&v, "upsilon"), ["3/8", "1/2", "1/8"]);
    let v = json(&run(&["exact", "subspace", "2", "--ambient", "3"]));
    assert_eq!(rationals(&v, "gamma"), ["1", "1", "0", "0"]);
    assert_eq!(rationals(&v, "upsilon"), ["0", "0", "1", "0"]);
}

#[test]
fn exact_pads_to_ambient_dimension() {
    let v = json(&run(&["exact", "orthant", "2", "--ambient", "4"]));
    assert_eq!(rationals(&v, "upsilon"), ["1/4", "1/2", "1/4", "0", "0"]);
}

#[test]
fn exact_decimals_have_twelve_significant_digits() {
    let o = run(&["exact", "weyl-b", "3", "--format", "csv"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,ambient,index,upsilon,upsilon_decimal,gamma,gamma_decimal"
    );
    let row: Vec<&str> = lines.nth(2).unwrap().split(',').collect();
    assert_eq!(row[5], "1/24");
    assert_eq!(row[6], "0.0416666666667");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["exact", "cube", "3"],
        vec!["exact", "orthant", "3", "--ambient", "2"],
        vec!["estimate", "absorption", "--cone", "orthant:x"],
        vec!["estimate", "absorption", "--cone", "cube:3"],
        vec!["estimate", "nonsense"],
        vec!["verify", "nonsense"],
        vec!["verify", "all", "--k", "2"],
        vec!["estimate", "absorption", "--samples", "10"],
        vec!["estimate", "grassmann", "--cone", "subspace:1,2"],
        vec!["verify", "theorem-655", "--threads", "0"],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn statistical_failure_exits_with_three() {
    // A z bound this tight cannot hold for a noisy estimate.
    let o = run(&[
        "estimate",
        "absorption",
        "--cone",
        "orthant:4",
        "--k",
        "2",
        "--samples",
        "10000",
        "--z-max",
        "1e-9",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&o);
    assert_eq!(v["pass"], false);
}

#[test]
fn estimate_absorption_report() {
    let o = run(&[
        "estimate",
        "absorption",
        "--cone",
        "orthant:4",
        "--k",
        "2",
        "--samples",
        "100000",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert!(schema().is_valid(&v));
    assert_eq!(v["experiment"], "absorption");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["params"]["cone"], "orthant:4");
    let e = &v["estimates"][0];
    assert_eq!(e["exact"], 0.5);
    assert!(e["z"].as_f64().unwrap().abs() <= 3.0);
    assert!(v["wall_time_ms"].is_null());
}

#[test]
fn estimate_accepts_json_cones() {
    let cone = r#"{"ambient_dim": 2, "generators": [[1, 0], [1, 1]]}"#;
    let o = run(&[
        "estimate",
        "persistence",
        "--cone",
        cone,
        "--samples",
        "20000",
    ]);
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["estimates"][0]["exact"].is_null());
    assert!((v["estimates"][0]["value"].as_f64().unwrap() - 0.375).abs() < 0.02);
}

#[test]
fn estimate_intrinsic_mgf_for_weyl_two() {
    let o = run(&["estimate", "intrinsic-mgf", "--cone", "weyl-b:2"]);
    assert!(o.status.success());
    let v = json(&o);
    let names: Vec<&str> = v["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names.iter().filter(|n| n.starts_with("upsilon_")).count(),
        3
    );
    assert!(names.contains(&"mgf(r=1)"));
}

#[test]
fn estimates_are_byte_identical_across_runs_and_threads() {
    let args = [
        "estimate",
        "angle-sums",
        "--n",
        "3",
        "--k",
        "2",
        "--ell",
        "0",
        "--j",
        "1",
        "--samples",
        "20000",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(a.stdout, run(&threaded).stdout);
}

#[test]
fn verify_bundle_matches_schema_and_csv_header() {
    let o = run(&["verify", "all", "--samples", "10000", "--seed", "3"]);
    let v = json(&o);
    assert!(
        schema().is_valid(&v),
        "{:?}",
        schema()
            .iter_errors(&v)
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
    );
    assert_eq!(v["reports"].as_array().unwrap().len(), 10);

    let o = run(&[
        "verify",
        "persistence-v0",
        "--samples",
        "10000",
        "--format",
        "csv",
    ]);
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "experiment,name,value,stderr,samples,exact,z,tolerance,pass"
    );
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn verify_gaussian_image_experiment_passes() {
    let o = run(&[
        "verify",
        "theorem-655",
        "--cone",
        "weyl-b:3",
        "--k",
        "2",
        "--j",
        "1",
    ]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["estimates"][0]["exact"], 0.375);
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_wendel_six_three() {
    let o = run(&["verify", "absorption-wendel", "--n", "6", "--k", "3"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["estimates"][0]["exact"], 0.5);
}

#[test]
fn out_flag_writes_file_and_timing_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let o = run(&[
        "verify",
        "persistence-v0",
        "--samples",
        "10000",
        "--timing",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(v["wall_time_ms"].is_u64());
    assert!(schema().is_valid(&v));
}
