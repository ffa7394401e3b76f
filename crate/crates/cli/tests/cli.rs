use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use segreg_cli::io::parse_dataset;
use segreg_cli::truth::TruthFile;
use serde_json::Value;

fn segreg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segreg"))
        .current_dir(dir)
        .env_remove("SEGREG_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = segreg(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn without_timings(mut v: Value) -> Value {
    v["manifest"]["timings"] = Value::Null;
    v
}

fn simulate_two(dir: &Path, name: &str, n: usize, p: usize, sigma: f64, seed: u64) {
    ok(
        dir,
        &[
            "simulate", "--model", "two", "--n", &n.to_string(), "--p", &p.to_string(), "--sigma",
            &sigma.to_string(), "--seed", &seed.to_string(), "--output", name,
        ],
    );
}

#[test]
fn simulate_writes_dataset_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 100, 200, 1.0, 1);
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 201);
    assert_eq!((header[0], header[1], header[200]), ("y", "x1", "x200"));
    assert_eq!(lines.count(), 100);
    let truth = TruthFile::read(&dir.path().join("d.csv.truth.json")).unwrap();
    assert_eq!(truth.alpha0, vec![0.0, 0.5, 1.0]);
    assert_eq!(truth.alpha0_rows, Some(vec![0, 50, 100]));
    assert_eq!(truth.seed, Some(1));
    let manifest = json(dir.path().join("d.csv.manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seeds"][0], 1);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "a.csv", 60, 30, 1.0, 9);
    simulate_two(dir.path(), "b.csv", 60, 30, 1.0, 9);
    simulate_two(dir.path(), "c.csv", 60, 30, 1.0, 10);
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn noiseless_simulation_has_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--model", "three", "--n", "50", "--p", "6", "--sigma", "0", "--cov", "toeplitz:0.5", "--output", "d.csv"],
    );
    let data = parse_dataset(&fs::read(dir.path().join("d.csv")).unwrap(), None, false).unwrap();
    let truth = TruthFile::read(&dir.path().join("d.csv.truth.json")).unwrap();
    let rows = truth.alpha0_rows.clone().unwrap();
    let model = truth.model().unwrap();
    for i in 0..data.n() {
        let seg = rows.windows(2).position(|w| i >= w[0] && i < w[1]).unwrap();
        // same summation order as the generator: nonzero coefficients ascending
        let fit = model.betas0[seg]
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .fold(0.0, |acc, (j, b)| acc + data.row(i)[j] * b);
        assert_eq!(data.y()[i] - fit, 0.0);
    }
}

#[test]
fn detect_reports_the_planted_break() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 200, 20, 0.5, 1);
    for method in ["dp", "bs"] {
        let out = format!("{method}.json");
        ok(dir.path(), &["detect", "--input", "d.csv", "--method", method, "--truth", "d.csv.truth.json", "--output", &out]);
        let r = json(dir.path().join(&out));
        assert_eq!(r["k_hat"], 2);
        assert_eq!(r["alpha_hat"]["rows"][1], 100);
        assert_eq!(r["betas"].as_array().unwrap().len(), 2);
        assert_eq!(r["evaluation"]["k_match"], true);
        assert!(r["kkt_gaps"].as_array().unwrap().iter().all(|g| g.as_f64().unwrap() <= 1e-6));
        assert!(r["cache_stats"]["misses"].as_u64().unwrap() > 0);
        assert_eq!(r["manifest"]["input_sha256"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn huge_gamma_gives_one_segment() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 80, 10, 0.5, 2);
    ok(dir.path(), &["detect", "--input", "d.csv", "--gamma", "1e9", "--output", "r.json"]);
    let r = json(dir.path().join("r.json"));
    assert_eq!(r["k_hat"], 1);
    assert_eq!(r["alpha_hat"]["fractions"], serde_json::json!([0.0, 1.0]));
}

#[test]
fn malformed_input_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "y,x1,x2\n1,2,3\n4,5\n7,8,9\n").unwrap();
    fs::write(dir.path().join("nan.csv"), "y,x1\n1,2\n4,abc\n7,8\n").unwrap();
    for input in ["bad.csv", "nan.csv", "missing.csv"] {
        let out = segreg(dir.path(), &["detect", "--input", input, "--output", "r.json"]);
        assert_eq!(out.status.code(), Some(2), "{input}");
        assert!(!dir.path().join("r.json").exists());
    }
    let out = segreg(dir.path(), &["detect", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 40, 5, 0.5, 2);
    let out = segreg(dir.path(), &["detect", "--input", "d.csv", "--delta", "0.9", "--output", "r.json"]);
    assert_eq!(out.status.code(), Some(3));
    let out = segreg(dir.path(), &["detect", "--input", "d.csv", "--lambda=-1", "--output", "r.json"]);
    assert_eq!(out.status.code(), Some(3));
    let out = segreg(dir.path(), &["simulate", "--model", "two", "--p", "2", "--n", "10", "--output", "s.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let out = segreg(dir.path(), &["simulate", "--model", "two", "--p", "5", "--cov", "equicorr:1", "--n", "10", "--output", "s.csv"]);
    assert_eq!(out.status.code(), Some(2), "cov parse errors are usage errors");
    assert!(!dir.path().join("r.json").exists() && !dir.path().join("s.csv").exists());
    let out = Command::new(env!("CARGO_BIN_EXE_segreg"))
        .current_dir(dir.path())
        .env("SEGREG_THREADS", "many")
        .args(["detect", "--input", "d.csv", "--output", "r.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solver_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 60, 30, 0.5, 3);
    let out = segreg(
        dir.path(),
        &["detect", "--input", "d.csv", "--lambda", "0.01", "--max-sweeps", "1", "--output", "r.json"],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 120, 15, 0.5, 4);
    ok(dir.path(), &["--threads", "1", "detect", "--input", "d.csv", "--output", "one.json"]);
    ok(dir.path(), &["detect", "--input", "d.csv", "--output", "three.json", "--threads", "3"]);
    let one = without_timings(json(dir.path().join("one.json")));
    let mut three = without_timings(json(dir.path().join("three.json")));
    three["manifest"]["config"]["output"] = one["manifest"]["config"]["output"].clone();
    assert_eq!(one, three);
}

#[test]
fn order_by_sorts_and_drops_the_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("o.csv"), "y,t,x1\n3,2,30\n1,0,10\n2,1,20\n4,3,40\n").unwrap();
    let data = parse_dataset(&fs::read(dir.path().join("o.csv")).unwrap(), Some("t"), false).unwrap();
    assert_eq!(data.y(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(data.column(0), &[10.0, 20.0, 30.0, 40.0]);
    assert_eq!(data.p(), 1);
    let centered = parse_dataset(&fs::read(dir.path().join("o.csv")).unwrap(), Some("t"), true).unwrap();
    assert_eq!(centered.y(), &[-1.5, -0.5, 0.5, 1.5]);
}

#[test]
fn cv_grid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 120, 8, 0.3, 5);
    ok(dir.path(), &["cv", "--input", "d.csv", "--lambdas", "0.05", "--k-max", "1", "--output", "one.csv"]);
    let text = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let summary = json(dir.path().join("one.csv.summary.json"));
    assert_eq!(summary["best"]["k"], 1);

    // k up to 12 with delta = 0.1 exceeds 1 / delta: cells are marked
    ok(dir.path(), &["cv", "--input", "d.csv", "--lambdas", "0.01:0.1:2", "--k-max", "12", "--output", "wide.csv"]);
    let text = fs::read_to_string(dir.path().join("wide.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 12);
    assert!(text.lines().any(|l| l.starts_with("0.01,11,,infeasible")));
    let summary = json(dir.path().join("wide.csv.summary.json"));
    assert_eq!(summary["best"]["k"], 2);
    assert_eq!(summary["n_train"], 60);

    let out = segreg(dir.path(), &["cv", "--input", "d.csv", "--lambdas", "0.1:x:3", "--output", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = segreg(dir.path(), &["cv", "--input", "d.csv", "--lambdas", "0.1", "--k-max", "0", "--output", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_table_shape_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["bench", "--model", "two", "--p", "10", "--n-list", "100,200,400", "--reps", "2", "--output", "b.csv"],
    );
    let text = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(text.lines().next().unwrap(), "n,method,mean_seconds,sd_seconds,cache_misses");
    assert_eq!(rows.len(), 6);
    let mean = |n: &str, m: &str| -> f64 {
        rows.iter().find(|r| r[0] == n && r[1] == m).unwrap()[2].parse().unwrap()
    };
    let ratio: Vec<f64> = ["100", "200", "400"].iter().map(|n| mean(n, "bs") / mean(n, "dp")).collect();
    assert!(ratio[0] > ratio[1] && ratio[1] > ratio[2], "bs/dp time ratios {ratio:?}");
    assert_eq!(json(dir.path().join("b.csv.manifest.json"))["seeds"], serde_json::json!([0, 1]));

    ok(dir.path(), &["bench", "--p", "5", "--n-list", "40", "--reps", "1", "--output", "one.csv"]);
    let text = fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("0")));
}

#[test]
fn rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate_two(dir.path(), "d.csv", 80, 10, 0.5, 6);
    ok(dir.path(), &["rerun", "d.csv.manifest.json", "--output", "again.csv"]);
    assert_eq!(fs::read(dir.path().join("d.csv")).unwrap(), fs::read(dir.path().join("again.csv")).unwrap());

    ok(dir.path(), &["detect", "--input", "d.csv", "--method", "bs", "--output", "r.json"]);
    ok(dir.path(), &["rerun", "r.json", "--output", "r2.json"]);
    let first = without_timings(json(dir.path().join("r.json")));
    let mut second = without_timings(json(dir.path().join("r2.json")));
    second["manifest"]["config"]["output"] = first["manifest"]["config"]["output"].clone();
    assert_eq!(first, second);

    // a changed input is refused
    let mut text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    text.push_str(&text.lines().last().unwrap().to_string());
    text.push('\n');
    fs::write(dir.path().join("d.csv"), text).unwrap();
    let out = segreg(dir.path(), &["rerun", "r.json", "--output", "r3.json"]);
    assert_eq!(out.status.code(), Some(3));
}
