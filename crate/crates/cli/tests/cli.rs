use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathwise::lasso_family::least_squares;
use pathwise::numeric::{standardize, DesignMatrix};
use pathwise_cli::io;
use serde_json::Value;

fn pathwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathwise")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_regression(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("reg{seed}"));
    let r = pathwise(&["gen", "--kind", "regression", "--n", "60", "--p", "8", "--seed", &seed.to_string(), "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    out
}

fn fit(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let (x, y) = (data.join("x.csv"), data.join("y.csv"));
    let mut args = vec!["fit", "--x", s(&x), "--y", s(&y), "--output", s(out)];
    args.extend_from_slice(extra);
    pathwise(&args)
}

fn validate(data: &Path, path: &Path) -> Output {
    let (x, y) = (data.join("x.csv"), data.join("y.csv"));
    pathwise(&["validate", "--x", s(&x), "--y", s(&y), "--path", s(path)])
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn gen_is_deterministic_and_checks_its_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_regression(dir.path(), 4);
    let b = dir.path().join("again");
    let r = pathwise(&["gen", "--kind", "regression", "--n", "60", "--p", "8", "--seed", "4", "--output", s(&b)]);
    assert_eq!(code(&r), 0);
    for f in ["x.csv", "y.csv", "beta.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = gen_regression(dir.path(), 5);
    assert_ne!(std::fs::read(a.join("x.csv")).unwrap(), std::fs::read(c.join("x.csv")).unwrap());
    let bad = pathwise(&["gen", "--kind", "regression", "--rho", "1", "--seed", "1", "--output", s(&b)]);
    assert_eq!(code(&bad), 2);
    let unseeded = pathwise(&["gen", "--kind", "regression", "--output", s(&b)]);
    assert_eq!(code(&unseeded), 2);
}

#[test]
fn lasso_fit_is_certified_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_regression(dir.path(), 1);
    let path = dir.path().join("lasso.jsonl");
    let r = fit(&data, &path, &["--method", "lasso", "--lambda", "0.5"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let recs = records(&path);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["certified"], Value::Bool(true));
    assert_eq!(recs[0]["lambda"].as_f64(), Some(0.5));
    assert_eq!(code(&validate(&data, &path)), 0);
}

#[test]
fn unpenalized_enet_is_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_regression(dir.path(), 2);
    let path = dir.path().join("ls.jsonl");
    let r = fit(&data, &path, &["--method", "enet", "--lambda1", "0", "--lambda2", "0"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rows = io::read_matrix(&data.join("x.csv"), false).unwrap();
    let y = io::read_vector(&data.join("y.csv"), false).unwrap();
    let x = standardize(&DesignMatrix::from_rows(&rows).unwrap()).unwrap();
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - m).collect();
    let ls = least_squares(&x, &yc).unwrap();
    let rec = &records(&path)[0];
    let coef: Vec<f64> = rec["coefficients"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (a, b) in coef.iter().zip(&ls) {
        assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
    }
    // raw coefficients reproduce the raw least-squares fit
    let raw: Vec<f64> = rec["raw_coefficients"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let b0 = rec["raw_intercept"].as_f64().unwrap();
    let resid: Vec<f64> = rows
        .iter()
        .zip(&y)
        .map(|(r, yi)| yi - b0 - r.iter().zip(&raw).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    for j in 0..raw.len() {
        let g: f64 = rows.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
        assert!(g.abs() < 1e-6, "normal equation {j}: {g}");
    }
}

#[test]
fn input_errors_exit_2_and_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_regression(dir.path(), 3);
    let missing = dir.path().join("nope.csv");
    let y = data.join("y.csv");
    let out = dir.path().join("p.jsonl");
    let r = pathwise(&["fit", "--method", "lasso", "--x", s(&missing), "--y", s(&y), "--output", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("nope.csv"), "{}", stderr(&r));
    let bad = dir.path().join("bad.csv");
    let mut text = std::fs::read_to_string(data.join("x.csv")).unwrap();
    text = text.replacen('\n', "\n1,2,oops\n", 2);
    std::fs::write(&bad, text).unwrap();
    let r = pathwise(&["fit", "--method", "lasso", "--x", s(&bad), "--y", s(&y), "--output", s(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("bad.csv:2"), "{}", stderr(&r));
    let r = pathwise(&["fit", "--method", "nonsense", "--x", s(&bad), "--y", s(&y)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn validate_rejects_perturbed_and_empty_paths() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_regression(dir.path(), 1);
    let path = dir.path().join("path.jsonl");
    assert_eq!(code(&fit(&data, &path, &["--method", "lasso", "--nlambda", "5"])), 0);
    assert_eq!(code(&validate(&data, &path)), 0);
    let mut recs = records(&path);
    let c = recs[3]["coefficients"][0].as_f64().unwrap();
    recs[3]["coefficients"][0] = Value::from(c + 0.01);
    let tampered = dir.path().join("tampered.jsonl");
    std::fs::write(&tampered, recs.iter().map(|r| r.to_string() + "\n").collect::<String>()).unwrap();
    let r = validate(&data, &tampered);
    assert_eq!(code(&r), 5);
    assert!(stderr(&r).contains("tampered.jsonl:4"), "{}", stderr(&r));
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&validate(&data, &empty)), 2);
    let garbage = dir.path().join("garbage.jsonl");
    std::fs::write(&garbage, "{\"index\": 0}\n").unwrap();
    let r = validate(&data, &garbage);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("garbage.jsonl:1"), "{}", stderr(&r));
}

#[test]
fn every_method_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_regression(dir.path(), 6);
    let cases: [&[&str]; 8] = [
        &["--method", "lasso"],
        &["--method", "enet", "--lambda2", "0.5"],
        &["--method", "garotte"],
        &["--method", "lad"],
        &["--method", "ladlasso", "--nlambda", "5"],
        &["--method", "grouplasso", "--groups", "0,1,2;3;4,5;6,7"],
        &["--method", "berhu", "--berhu-delta", "0.5"],
        &["--method", "fused", "--lambda1", "0.2", "--lambda2", "1", "--delta", "0.05"],
    ];
    for (k, extra) in cases.iter().enumerate() {
        let path = dir.path().join(format!("m{k}.jsonl"));
        let r = fit(&data, &path, extra);
        assert_eq!(code(&r), 0, "{extra:?}: {}", stderr(&r));
        assert!(records(&path).iter().all(|r| r["certified"] == Value::Bool(true)), "{extra:?}");
        let v = validate(&data, &path);
        assert_eq!(code(&v), 0, "{extra:?}: {}", stderr(&v));
    }
    let fused = records(&dir.path().join("m7.jsonl"));
    assert_eq!(fused.len(), 21);
    assert_eq!(fused.last().unwrap()["lambda2"].as_f64(), Some(1.0));
}

fn gen_image(dir: &Path, kind: &str, side: usize, sigma: f64, extra: &[&str]) -> PathBuf {
    let out = dir.join(kind);
    let side = side.to_string();
    let sigma = sigma.to_string();
    let mut args = vec!["gen", "--kind", kind, "--side", &side, "--sigma", &sigma, "--seed", "3", "--output", s(&out)];
    args.extend_from_slice(extra);
    let r = pathwise(&args);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    out
}

#[test]
fn denoise_without_penalty_reproduces_the_input() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["p5", "p2"] {
        let img = gen_image(&dir.path().join(format), "blocks-image", 16, 1.0, &["--format", format]);
        let input = img.join("noisy.pgm");
        let out = img.join("same.pgm");
        let r = pathwise(&["denoise", "--input", s(&input), "--output", s(&out)]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&input).unwrap(), "{format}");
        assert_eq!(
            std::fs::read_to_string(io::sidecar_path(&out)).unwrap(),
            std::fs::read_to_string(io::sidecar_path(&input)).unwrap()
        );
    }
}

#[test]
fn plus_image_denoises_to_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    let img = gen_image(dir.path(), "plus-image", 8, 0.0, &[]);
    let out = dir.path().join("plus.pgm");
    let r = pathwise(&["denoise", "--input", s(&img.join("noisy.pgm")), "--lambda1", "0.1", "--lambda2", "0.2", "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let groups = records(&io::partition_path(&out));
    assert_eq!(groups.len(), 2);
    let sizes: Vec<u64> = groups.iter().map(|g| g["size"].as_u64().unwrap()).collect();
    assert_eq!(sizes.iter().sum::<u64>(), 64);
    assert!(sizes.contains(&20), "{sizes:?}");
    let report: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["groups"], Value::from(2));
}

#[test]
fn two_fold_selection_and_geometry_errors() {
    let dir = tempfile::tempdir().unwrap();
    let img = gen_image(dir.path(), "blocks-image", 12, 1.0, &["--blocks", "3"]);
    let input = img.join("noisy.pgm");
    let out1 = dir.path().join("a.pgm");
    let out2 = dir.path().join("b.pgm");
    let r1 = pathwise(&["denoise", "--input", s(&input), "--two-fold", "--pure-fusion", "--jobs", "1", "--output", s(&out1)]);
    let r2 = pathwise(&["denoise", "--input", s(&input), "--two-fold", "--pure-fusion", "--jobs", "3", "--output", s(&out2)]);
    assert_eq!(code(&r1), 0, "{}", stderr(&r1));
    assert_eq!(r1.stdout, r2.stdout);
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    let report: Value = serde_json::from_slice(&r1.stdout).unwrap();
    assert_eq!(report["lambda1"].as_f64(), Some(0.0));
    assert_eq!(report["selected_by"], Value::from("two-fold"));
    let tiny = dir.path().join("tiny.pgm");
    std::fs::write(&tiny, "P2\n2 5\n9\n1 2\n3 4\n5 6\n7 8\n9 0\n").unwrap();
    let r = pathwise(&["denoise", "--input", s(&tiny), "--two-fold", "--output", s(&out1)]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
    let broken = dir.path().join("broken.pgm");
    std::fs::write(&broken, "P2\n2 2\n9\n1 2\n3 x\n").unwrap();
    let r = pathwise(&["denoise", "--input", s(&broken), "--output", s(&out1)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("broken.pgm:5"), "{}", stderr(&r));
}

#[test]
fn bench_writes_a_machine_readable_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let r = pathwise(&["bench", "--suite", "flsa2d-grid", "--runs", "1", "--sizes", "4,6", "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.contains("| side | 6 |"), "{text}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["suite"], Value::from("flsa2d-grid"));
    assert_eq!(report["timings"].as_array().unwrap().len(), 2);
    let r = pathwise(&["bench", "--suite", "flsa-path", "--runs", "1", "--sizes", "500"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let r = pathwise(&["bench", "--suite", "lasso-scaling", "--runs", "1", "--sizes", "50,100", "--p-sizes", "10,20", "--fixed-p", "10", "--fixed-n", "100"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(String::from_utf8_lossy(&r.stdout).contains("slope vs p"));
}
