use std::fs;

use rfmdp::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("rfmdp").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn analyze_epidemic() {
    let (code, out, _) = call(&["analyze", "--family", "epidemic", "--n", "3"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["c"], 3);
    assert_eq!(v["w"], 1);
    assert_eq!(v["cliques"], serde_json::json!([["Sick"], ["Travel"], ["Epidemic"]]));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(call(&["analyze", "--bogus"]).0, 2);
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&["plan"]).0, 2);
    assert_eq!(call(&["plan", "approx", "--family", "epidemic", "--n", "2", "--basis", "other"]).0, 2);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["analyze", "plan", "query", "check", "bench", "serve"] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn domain_errors_exit_one() {
    let (code, _, err) = call(&["analyze", "--model", "/nonexistent/model.json"]);
    assert_eq!(code, 1);
    assert!(err.contains("cannot read"));
    assert_eq!(call(&["analyze"]).0, 1);
    assert_eq!(call(&["check", "ground", "--family", "epidemic", "--n", "7"]).0, 1);
}

#[test]
fn plan_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let v = dir.path().join("V.json");
    let w = dir.path().join("W.json");
    let state = dir.path().join("S.json");
    let p = |x: &std::path::Path| x.to_str().unwrap().to_string();

    assert_eq!(call(&["model", "--family", "epidemic", "--n", "3", "--out", &p(&model)]).0, 0);
    assert_eq!(call(&["plan", "exact", "--model", &p(&model), "--out", &p(&v), "--alpha", "uniform"]).0, 0);
    assert_eq!(call(&["plan", "approx", "--model", &p(&model), "--basis", "default", "--out", &p(&w)]).0, 0);
    let vdoc: Value = serde_json::from_str(&fs::read_to_string(&v).unwrap()).unwrap();
    assert_eq!(vdoc["kind"], "exact");
    assert_eq!(vdoc["states"].as_array().unwrap().len(), 32);
    fs::write(&state, r#"{"Sick": [2, 1], "Travel": [1, 2], "Epidemic": true}"#).unwrap();

    for (plan, mode) in [(&v, "exact"), (&w, "approx")] {
        let (code, out, err) = call(&[
            "query", "--model", &p(&model), "--plan", &p(plan), "--state", &p(&state),
            "--min-reward", "-inf", "--restrict", "count(Sick,false) >= 2", "--min-prob", "0", "--mode", mode,
        ]);
        assert_eq!(code, 0, "{err}");
        let r: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(r["mode"], mode);
        assert_eq!(r["t"], "-inf");
        assert_eq!(r["actions"].as_array().unwrap().len(), 6);
    }
    let (code, _, err) = call(&["query", "--model", &p(&model), "--plan", &p(&w), "--state", &p(&state), "--mode", "exact"]);
    assert_eq!(code, 1);
    assert!(err.contains("approx"));
    let (code, _, _) = call(&["query", "--family", "epidemic", "--n", "4", "--plan", &p(&v), "--state", &p(&state)]);
    assert_eq!(code, 1, "plan of another model");
    let (code, _, _) = call(&["query", "--model", &p(&model), "--plan", &p(&v), "--state", &p(&state), "--restrict", "count(Cough,true) >= 1"]);
    assert_eq!(code, 1);
}

#[test]
fn check_ground_reports() {
    let (code, out, _) = call(&["check", "ground", "--family", "epidemic", "--n", "2", "--tol", "1e-6"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["ground_states"], 32);
    let (code, out, _) = call(&["check", "ground", "--family", "epidemic", "--n", "2", "--tol", "1e-12"]);
    assert_eq!(code, 1, "value iteration is only accurate to about 1e-8");
    assert_eq!(serde_json::from_str::<Value>(&out).unwrap()["passed"], false);
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let (code, _, err) = call(&[
        "bench", "--family", "epidemic", "--n-min", "2", "--n-max", "4", "--algorithms", "exact,approx", "--time-limit", "60",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), rfmdp::bench::CSV_HEADER);
    assert_eq!(lines.count(), 3 * 2 * 3);
    assert_eq!(call(&["bench", "--algorithms", "simulated"]).0, 1);
}
