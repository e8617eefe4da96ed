use std::path::{Path, PathBuf};

use condlab_cli::mtx::{read_matrix_market, write_matrix_market};
use condlab_cli::schema::parse_problem_file;
use condlab_core::ensembles::sample_weyl_upoly;
use condlab_core::numlin::RealMatrix;
use serde_json::{json, Value};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["condlab"];
    full.extend_from_slice(args);
    let code = condlab_cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, doc.to_string()).unwrap();
    path
}

fn report_rows(stdout: &str) -> Vec<Value> {
    let v: Value = serde_json::from_str(stdout).unwrap();
    v["rows"].as_array().unwrap().clone()
}

fn close(v: &Value, expected: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - expected).abs() <= tol
}

#[test]
fn analyze_linear_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "lin.json",
        &json!({"problems": [
            {"id": "scaled", "family": "linear_fixed_b", "A": [[2, 0], [0, 2]], "b": [2, 0]},
            {"id": "identity", "family": "linear_fixed_b", "A": [[1, 0], [0, 1]], "b": [1, 0]},
        ]}),
    );
    let (code, out, _) = run(&["analyze", path.to_str().unwrap(), "--p-list", "2", "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = report_rows(&out);
    assert!(close(&rows[0]["kappa"], 0.5, 1e-14));
    assert!(close(&rows[0]["kappa_avg_p2"], 0.5 / 2f64.sqrt(), 1e-14));
    assert!(close(&rows[1]["kappa"], 1.0, 1e-14));
}

#[test]
fn singular_input_is_reported_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "sing.json",
        &json!({"family": "linear_general", "A": [[1, 2], [2, 4]], "b": [1, 1]}),
    );
    let (code, out, _) = run(&["analyze", path.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code, 2);
    let rows = report_rows(&out);
    assert_eq!(rows[0]["status"], "Sigma");
    assert_eq!(rows[0]["kappa"], "inf");
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n \"family\": \"map\",\n \"matrix\": [[1, 2],\n}").unwrap();
    let (code, _, err) = run(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 4"), "{err}");

    let mismatch = write(dir.path(), "mm.json", &json!({"family": "linear_fixed_b", "A": [[1, 0], [0, 1]], "b": [1, 2, 3]}));
    let (code, _, err) = run(&["analyze", mismatch.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("dimension mismatch"), "{err}");

    let (code, _, _) = run(&["analyze", "/nonexistent/file.json"]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("analyze"));
}

#[test]
fn verify_synthetic_maps() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "maps.json",
        &json!({"problems": [
            {"id": "diag", "family": "map", "matrix": [[3, 0], [0, 4]]},
            {"id": "eye", "family": "map", "matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
        ]}),
    );
    let (code, out, _) = run(&["verify", path.to_str().unwrap(), "--samples", "1000000", "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = report_rows(&out);
    assert!(close(&rows[0]["closed"], 5.0 / 2f64.sqrt(), 1e-12));
    assert_eq!(rows[0]["pass"], true);
    // Every unit vector has norm 1 under the identity.
    assert!(close(&rows[1]["oracle"], 1.0, 1e-12));
    assert_eq!(rows[1]["pass"], true);
}

#[test]
fn verify_rejects_too_few_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "m.json", &json!({"family": "map", "matrix": [[1]]}));
    let (code, _, _) = run(&["verify", path.to_str().unwrap(), "--samples", "999"]);
    assert_eq!(code, 1);
}

#[test]
fn verify_emits_the_upoly_adjudication_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "u.json", &json!({"family": "upoly", "coeffs": [-1, 0, 0, 1], "root": 1}));
    let (code, out, _) = run(&["verify", path.to_str().unwrap(), "--samples", "1000000", "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = report_rows(&out);
    let adj = rows.iter().find(|r| r["check"] == "upoly_constant").unwrap();
    assert_eq!(adj["m"], 8);
    assert!(adj["separation_sigmas"].as_f64().unwrap() > 5.0);
    assert_ne!(adj["supported"], "undecided");
}

#[test]
fn experiments_and_names() {
    let (code, out, _) = run(&["experiment", "rank-r", "--trials", "50", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert!(out.contains("measure differs from paper"));
    let (code, out, _) = run(&["experiment", "rank-r", "--trials", "50", "--format", "csv", "--no-timestamp"]);
    assert_eq!(code, 0);
    assert!(out.contains("measure differs from paper"));
    let (code, _, err) = run(&["experiment", "nope"]);
    assert_eq!(code, 1);
    assert!(err.contains("edelman") && err.contains("bp-bound") && err.contains("rank-r"), "{err}");
}

#[test]
fn csv_header_and_timestamp_line() {
    let (_, with_ts, _) = run(&["experiment", "bp-bound", "--d", "2", "--trials", "50", "--format", "csv"]);
    let (_, without, _) = run(&["experiment", "bp-bound", "--d", "2", "--trials", "50", "--format", "csv", "--no-timestamp"]);
    assert!(with_ts.starts_with("# generated_unix "));
    assert_eq!(with_ts.split_once('\n').unwrap().1, without);
    assert!(without.starts_with("record,quantity,size,mean,std_error,trials"));
}

#[test]
fn roots_order_and_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let square = write(dir.path(), "sq.json", &json!({"family": "upoly", "coeffs": [-1, 0, 1]}));
    let (code, out, _) = run(&["roots", square.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = report_rows(&out);
    assert!(close(&rows[0]["re"], 1.0, 1e-14) && close(&rows[1]["re"], -1.0, 1e-14));

    let coeffs = sample_weyl_upoly(10, 5).unwrap();
    let doc = json!({"problems": [
        {"id": "cube", "family": "upoly", "coeffs": [-1, 0, 0, 1]},
        {"id": "random", "family": "upoly", "coeffs": coeffs.iter().map(|c| json!([c.re, c.im])).collect::<Vec<_>>()},
    ]});
    let path = write(dir.path(), "r.json", &doc);
    let (code, out, _) = run(&["roots", path.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = report_rows(&out);
    assert_eq!(rows.iter().filter(|r| r["id"] == "cube").count(), 3);
    assert_eq!(rows.iter().filter(|r| r["id"] == "random").count(), 10);
    let fnorm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for r in &rows {
        let z = r["re"].as_f64().unwrap().hypot(r["im"].as_f64().unwrap());
        let scale = if r["id"] == "cube" { 2f64.sqrt() } else { fnorm * z.max(1.0).powi(10) };
        assert!(r["residual"].as_f64().unwrap() <= 1e-6 * scale, "{r}");
    }

    let deficient = write(dir.path(), "def.json", &json!({"family": "upoly", "coeffs": [1, 1, 0]}));
    let (code, _, err) = run(&["roots", deficient.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("degree-deficient"), "{err}");
}

#[test]
fn upoly_without_root_analyzes_every_root() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "u.json", &json!({"id": "f", "family": "upoly", "coeffs": [-1, 0, 1]}));
    let (code, out, _) = run(&["analyze", path.to_str().unwrap(), "--no-timestamp"]);
    assert_eq!(code, 0);
    let rows = report_rows(&out);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(close(&r["kappa"], 1.0, 1e-12));
    }
}

#[test]
fn json_reports_reparse_and_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "all.json",
        &json!({"problems": [
            {"family": "linear_general", "A": [[1, [0, 2]], [0.5, 3]], "b": [1, -1]},
            {"family": "eigen", "A": [[1, 10], [0, 2]], "index": 2, "target": "eigenvector"},
            {"family": "kernel", "A": [[1, 0, 0], [0, 1, 0]], "rank": 2},
            {"family": "upoly", "coeffs": [-1, 0, 1], "root": -1, "metric": "canonical"},
            {"family": "hpoly_system", "nvars": 2, "equations": [{"degree": 2, "terms": [{"exp": [1, 1], "coef": 1}]}], "root": [1, 0]},
            {"family": "map", "matrix": [[0.1, 0.2], [0.3, 0.7]]},
        ]}),
    );
    let (code, json_out, _) = run(&["analyze", path.to_str().unwrap(), "--p-list", "1,2,3", "--relative", "--no-timestamp"]);
    assert_eq!(code, 0);
    let (_, csv_out, _) = run(&["analyze", path.to_str().unwrap(), "--p-list", "1,2,3", "--relative", "--no-timestamp", "--format", "csv"]);
    let json_rows = report_rows(&json_out);
    assert_eq!(json_rows.len(), 6);
    let mut reader = csv::Reader::from_reader(csv_out.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "kappa_avg_p3").unwrap();
    for (record, row) in reader.records().zip(&json_rows) {
        let from_csv: f64 = record.unwrap()[col].parse().unwrap();
        assert_eq!(from_csv, row["kappa_avg_p3"].as_f64().unwrap());
        assert_eq!(row["status"], "ok");
    }
}

#[test]
fn matrix_market_round_trip_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let m = RealMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 + (i as f64).sqrt() } else { 1.0 / (1.0 + (i + 3 * j) as f64) });
    let text = write_matrix_market(&m);
    assert_eq!(read_matrix_market(&text).unwrap(), m);
    std::fs::write(dir.path().join("a.mtx"), &text).unwrap();
    let doc = json!({"family": "linear_fixed_b", "A": {"mtx": "a.mtx"}, "b": [1, 0, 0, 0]}).to_string();
    let problems = parse_problem_file(&doc, Some(dir.path())).unwrap();
    assert_eq!(problems.len(), 1);
    let path = write(dir.path(), "p.json", &json!({"family": "linear_fixed_b", "A": {"mtx": "a.mtx"}, "b": [1, 0, 0, 0]}));
    let (code, _, _) = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_condlab");
    let status = std::process::Command::new(bin).args(["experiment", "nope"]).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let status = std::process::Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
}
