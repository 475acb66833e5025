mod common;

use coda_core::sim::{Scenario, ScenarioSpec};
use common::{coda, d7_spec, run, scenario_csv, stderr, stdout, write};
use serde_json::Value;

fn json_lines(text: &str) -> Vec<Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect()
}

fn schema() -> jsonschema::Validator {
    let text = include_str!("../schema/test_result.schema.json");
    jsonschema::validator_for(&serde_json::from_str(text).unwrap()).expect("schema compiles")
}

#[test]
fn missing_k_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "d.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S1), 20, 20, 1),
    );
    let o = run(&["test", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_flags_are_rejected() {
    let o = run(&[
        "simulate",
        "--scenario",
        "s1",
        "--dist",
        "gaussian",
        "--bogus",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn separated_subspaces_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "s3.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S3), 100, 100, 3),
    );
    let o = run(&[
        "test",
        f.to_str().unwrap(),
        "--k",
        "2",
        "--method",
        "both",
        "--seed",
        "7",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = json_lines(&stdout(&o));
    assert_eq!(records.len(), 2);
    for r in &records {
        assert!(r["p_value"].as_f64().unwrap() <= 0.01, "{r}");
        assert_eq!(r["q"], 2);
        assert_eq!(r["n_y"], 100);
    }
}

#[test]
fn json_records_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "s1.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S1), 40, 60, 4),
    );
    let o = run(&[
        "test",
        f.to_str().unwrap(),
        "--k-range",
        "1..2",
        "--n-boot",
        "50",
        "--seed",
        "3",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let validator = schema();
    let records = json_lines(&stdout(&o));
    assert_eq!(records.len(), 4);
    for r in &records {
        let errors: Vec<String> = validator.iter_errors(r).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{r}: {errors:?}");
    }
    let mut broken = records[0].clone();
    broken["method"] = Value::from("theo");
    assert!(!validator.is_valid(&broken));
}

#[test]
fn d7_k_range_emits_four_p_values_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "d7.csv",
        &scenario_csv(&d7_spec(Scenario::S1), 30, 40, 5),
    );
    let o = run(&[
        "test",
        f.to_str().unwrap(),
        "--k-range",
        "1..4",
        "--n-boot",
        "100",
        "--seed",
        "1",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = json_lines(&stdout(&o));
    for method in ["schott", "bootstrap"] {
        let ks: Vec<u64> = records
            .iter()
            .filter(|r| r["method"] == method)
            .map(|r| r["k"].as_u64().unwrap())
            .collect();
        assert_eq!(ks, vec![1, 2, 3, 4], "{method}");
    }
    let text = run(&[
        "test",
        f.to_str().unwrap(),
        "--k-range",
        "1..4",
        "--n-boot",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(stdout(&text).matches("p=").count(), 8);
}

#[test]
fn test_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "d.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S1), 30, 30, 6),
    );
    let path = f.to_str().unwrap();
    let base = ["test", path, "--k", "2", "--n-boot", "300", "--seed", "42"];
    let a = run(&base);
    let b = run(&[&base[..], &["--jobs", "4"]].concat());
    let c = coda()
        .args(["test", path, "--k", "2", "--n-boot", "300"])
        .env("CODA_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let d = run(&["test", path, "--k", "2", "--n-boot", "300", "--seed", "43"]);
    assert_ne!(a.stdout, d.stdout);
}

#[test]
fn ci_mode_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "d.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S1), 100, 100, 1),
    );
    let o = coda()
        .args(["test", f.to_str().unwrap(), "--k", "2"])
        .env("CI", "true")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
    let ok = coda()
        .args([
            "test",
            f.to_str().unwrap(),
            "--k",
            "2",
            "--method",
            "schott",
        ])
        .env("CI", "true")
        .output()
        .unwrap();
    assert_eq!(
        ok.status.code(),
        Some(0),
        "the analytic test draws no random numbers"
    );
}

#[test]
fn input_errors_exit_one_with_their_name() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.csv",
        "a,b,c,d\n0.5,0.5,0,0\n0.4,0.6,0,0\n0.3,0.3,0.4,0\n0.2,0.3,0.3,0.2\n0.1,0.3,0.3,0.3\n",
    );
    let o = run(&["test", bad.to_str().unwrap(), "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("InconsistentZeroPattern"),
        "{}",
        stderr(&o)
    );

    let missing = run(&["test", "/nonexistent/file.csv", "--k", "1"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("IoError"));

    let mut full_text = String::from("a,b,c\n");
    for i in 0..40 {
        let t = i as f64 / 40.0;
        full_text.push_str(&format!(
            "{},{},{}\n",
            1.0 + t,
            2.0 + (7.0 * t).sin(),
            1.5 + (3.0 * t).cos()
        ));
    }
    let full = write(dir.path(), "full.csv", &full_text);
    let o = run(&["test", full.to_str().unwrap(), "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "test",
        full.to_str().unwrap(),
        "--k",
        "1",
        "--allow-no-zeros",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "test",
        full.to_str().unwrap(),
        "--k",
        "1",
        "--allow-no-zeros",
        "--y-rows",
        "20",
        "--method",
        "schott",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let f = write(
        dir.path(),
        "d.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S1), 20, 20, 1),
    );
    let o = run(&["test", f.to_str().unwrap(), "--k", "6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("BadK"));
}

#[test]
fn declared_zero_parts() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "d.csv",
        &scenario_csv(&ScenarioSpec::paper(Scenario::S1), 100, 100, 1),
    );
    let o = run(&[
        "test",
        f.to_str().unwrap(),
        "--k",
        "2",
        "--method",
        "schott",
        "--zero-parts",
        "p7,p8",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Q=2 (p7, p8)"));
    let o = run(&[
        "test",
        f.to_str().unwrap(),
        "--k",
        "2",
        "--method",
        "schott",
        "--zero-parts",
        "p8",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_output_and_determinism() {
    let args = [
        "simulate",
        "--scenario",
        "s2",
        "--dist",
        "uniform",
        "--sizes",
        "20x20,30x20",
        "--n-sim",
        "20",
        "--n-boot",
        "40",
        "--seed",
        "5",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = run(&[&args[..], &["--jobs", "4"]].concat());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("scenario,dist,dof,n_y,n_z,method,rejection_rate,n_sim,n_failed")
    );
    assert_eq!(lines.count(), 6);
    assert!(text.contains("s2,uniform,,30,20,bootstrap,"));

    let json = run(&[&args[..], &["--json", "--methods", "schott_theo"]].concat());
    let records = json_lines(&stdout(&json));
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["method"], "schott_theo");
}

#[test]
fn simulate_usage_errors() {
    let o = run(&[
        "simulate",
        "--scenario",
        "s1",
        "--dist",
        "student",
        "--n-sim",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "simulate",
        "--scenario",
        "s1",
        "--dist",
        "student",
        "--dof",
        "2",
        "--n-sim",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "simulate",
        "--scenario",
        "s1",
        "--dist",
        "gaussian",
        "--n-sim",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "simulate",
        "--scenario",
        "s1",
        "--dist",
        "gaussian",
        "--sizes",
        "20by20",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.csv");
    let o = run(&[
        "simulate",
        "--scenario",
        "s1",
        "--dist",
        "student",
        "--dof",
        "8",
        "--sizes",
        "20x20",
        "--n-sim",
        "10",
        "--methods",
        "schott_theo,schott_est",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.contains("s1,student,8,20,20,schott_est,"));
}

#[test]
fn transform_hand_values_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = "a,b,c\n0.8,0.2,0\n0.6,0.4,0\n0.5,0.3,0.2\n0.2,0.2,0.6\n0.1,0.7,0.2\n";
    let f = write(dir.path(), "d3.csv", input);
    let o = run(&["transform", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows[0][0], "y");
    assert_eq!(rows[0][2], "");
    let y1: f64 = rows[0][1].parse().unwrap();
    assert!((y1 - 0.5f64.sqrt() * 4f64.ln()).abs() < 1e-12);
    assert!((y1 - 0.980258).abs() < 1e-6);
    let z1: f64 = rows[2][1].parse().unwrap();
    let z2: f64 = rows[2][2].parse().unwrap();
    assert!((z1 - (2.0f64 / 3.0).sqrt() * (0.5 / (0.3f64 * 0.2).sqrt()).ln()).abs() < 1e-12);
    assert!((z2 - 0.5f64.sqrt() * (0.3f64 / 0.2).ln()).abs() < 1e-12);

    let coords = write(dir.path(), "coords.csv", &text);
    let back = run(&["transform", coords.to_str().unwrap(), "--inverse"]);
    assert_eq!(back.status.code(), Some(0), "{}", stderr(&back));
    let back_text = stdout(&back);
    let mut lines = back_text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("a,b,c"));
    for (orig, got) in input.lines().skip(1).zip(lines) {
        for (x, y) in orig.split(',').zip(got.split(',')) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!((x - y).abs() < 1e-9, "{orig} vs {got}");
        }
    }
}

#[test]
fn transform_of_uniform_rows_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "u.csv",
        "a,b,c,d\n1,1,1,0\n2,2,2,0\n0.25,0.25,0.25,0.25\n5,5,5,5\n",
    );
    let o = run(&["transform", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for line in stdout(&o).lines().filter(|l| !l.starts_with('#')).skip(1) {
        for v in line.split(',').skip(1).filter(|v| !v.is_empty()) {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-12, "{line}");
        }
    }
    let bad = run(&["transform", "/nonexistent.csv"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn cdf_outputs() {
    let o = run(&["cdf", "--scenario", "s2", "--dist", "gaussian"]);
    assert_eq!(o.status.code(), Some(2));

    let one = run(&["cdf", "--dist", "gaussian", "--n-sim", "1", "--seed", "2"]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    let text = stdout(&one);
    let empirical: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("empirical,"))
        .collect();
    assert_eq!(empirical.len(), 1);
    assert!(empirical[0].ends_with(",1"));
    assert!(text.lines().filter(|l| l.starts_with("fitted,")).count() > 100);
    assert!(stderr(&one).contains("ks_distance="));

    let a = run(&[
        "cdf", "--dist", "student", "--dof", "4", "--n-sim", "200", "--seed", "2", "--json",
    ]);
    let b = run(&[
        "cdf", "--dist", "student", "--dof", "4", "--n-sim", "200", "--seed", "2", "--json",
        "--jobs", "3",
    ]);
    assert_eq!(a.stdout, b.stdout);
    let summary = &json_lines(&stdout(&a))[0];
    assert_eq!(summary["empirical_right_of_fitted"], true, "{summary}");
}
