use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maxent_recon::io::{read_distribution, read_moments};
use maxent_recon::oracle::{reference_moments, ReferenceLaw};
use maxent_recon::{SupportWindow, FiniteDistribution};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxent-recon"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn moments_file(dir: &TempDir, mu: &[f64]) -> PathBuf {
    write(dir, "moments.json", &serde_json::json!({ "moments": mu }).to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn reconstruct_mean_one_matches_geometric() {
    let dir = TempDir::new().unwrap();
    let input = moments_file(&dir, &[1.0, 1.0]);
    let out = run(&["reconstruct", s(&input)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let dist = read_distribution(out.stdout.as_slice()).unwrap();
    for (x, p) in dist.iter() {
        assert!((p - 0.5f64.powi(x as i32 + 1)).abs() <= 1e-4, "x={x}");
    }
    let err = stderr(&out);
    assert!(err.contains("window:") && err.contains("converged: true"), "{err}");
}

#[test]
fn reconstruct_writes_output_file_and_json_diagnostics() {
    let dir = TempDir::new().unwrap();
    let input = moments_file(&dir, &[1.0, 3.0, 12.0]);
    let output = dir.path().join("out.json");
    let out = run(&[
        "reconstruct",
        s(&input),
        "-o",
        s(&output),
        "--output-format",
        "json",
        "--json-diagnostics",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let body: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    let p: Vec<f64> = serde_json::from_value(body["p"].clone()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let diag: serde_json::Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(diag["converged"], true);
    let achieved: Vec<f64> = serde_json::from_value(diag["achieved_moments"].clone()).unwrap();
    assert!((achieved[2] - 12.0).abs() < 1e-6 * 12.0);
}

#[test]
fn reconstruct_rejects_unnormalized_moments() {
    let dir = TempDir::new().unwrap();
    let input = moments_file(&dir, &[2.0, 1.0]);
    let out = run(&["reconstruct", s(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("μ₀ must equal 1"), "{}", stderr(&out));
}

#[test]
fn malformed_input_names_the_field() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.json", r#"{"moment": [1, 1]}"#);
    let out = run(&["reconstruct", s(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("moments"), "{}", stderr(&out));
}

#[test]
fn window_cap_exit_code() {
    let dir = TempDir::new().unwrap();
    let input = moments_file(&dir, &[1.0, 1.0, 50.0]);
    let out = run(&["reconstruct", s(&input), "--max-window", "60"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("window cap reached"));
}

#[test]
fn csv_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let mu = reference_moments(&ReferenceLaw::Poisson { rate: 5.0 }, SupportWindow::new(0, 100).unwrap(), 4).unwrap();
    let input = moments_file(&dir, mu.values());
    let output = dir.path().join("q.csv");
    let out = run(&["reconstruct", s(&input), "-o", s(&output)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&output).unwrap();
    let dist = read_distribution(text.as_bytes()).unwrap();
    let raw: f64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((raw - 1.0).abs() <= 1e-9);
    assert!(FiniteDistribution::new(dist.window(), dist.probs().to_vec()).is_ok());
}

#[test]
fn moments_command() {
    let dir = TempDir::new().unwrap();
    let uniform = write(&dir, "u.csv", "x,p\n0,0.3333333333333333\n1,0.3333333333333333\n2,0.3333333333333334\n");
    let out = run(&["moments", s(&uniform), "--max-order", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let mu = read_moments(out.stdout.as_slice()).unwrap();
    assert!((mu.get(1) - 1.0).abs() < 1e-12 && (mu.get(2) - 5.0 / 3.0).abs() < 1e-12);

    let point = write(&dir, "p.csv", "x,p\n3,1\n");
    let out = run(&["moments", s(&point), "--max-order", "3"]);
    assert_eq!(read_moments(out.stdout.as_slice()).unwrap().values(), &[1.0, 3.0, 9.0, 27.0]);

    let law = ReferenceLaw::Poisson { rate: 5.0 };
    let d = SupportWindow::new(0, 30).unwrap();
    let q = law.truncated(d).unwrap();
    let mut body = String::from("x,p\n");
    for (x, p) in q.iter() {
        body.push_str(&format!("{x},{p:.16e}\n"));
    }
    let path = write(&dir, "poisson.csv", &body);
    let out = run(&["moments", s(&path), "--max-order", "4"]);
    let got = read_moments(out.stdout.as_slice()).unwrap();
    let want = reference_moments(&law, d, 4).unwrap();
    for k in 0..=4 {
        assert!((got.get(k) - want.get(k)).abs() <= 1e-9 * want.get(k), "order {k}");
    }

    let bad = write(&dir, "bad.csv", "x,p\n0,0.5\n1,0.4\n");
    assert_eq!(run(&["moments", s(&bad)]).status.code(), Some(1));
}

#[test]
fn support_command() {
    let dir = TempDir::new().unwrap();
    let input = moments_file(&dir, &[1.0, 1.0, 2.0, 4.0, 8.0]);
    let out = run(&["support", s(&input), "--output-format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let roots: Vec<f64> = serde_json::from_value(v["delta0_roots"].clone()).unwrap();
    assert!(roots[0].abs() < 1e-9 && (roots[1] - 2.0).abs() < 1e-9);
    assert_eq!(v["initial_window"]["left"], 0);
    assert_eq!(v["initial_window"]["right"], 2);

    let input = moments_file(&dir, &[1.0, 5.0, 26.0]);
    let text = stdout(&run(&["support", s(&input)]));
    assert!(text.contains("initial window: {5..5}"), "{text}");

    let input = moments_file(&dir, &[1.0, 3.0, 10.0]);
    let text = stdout(&run(&["support", s(&input)]));
    assert!(text.contains("chebyshev window: {0..103}"), "{text}");
}

#[test]
fn compare_command() {
    let dir = TempDir::new().unwrap();
    let d = SupportWindow::new(0, 20).unwrap();
    let mu = reference_moments(&ReferenceLaw::Binomial { trials: 20, p: 0.3 }, d, 4).unwrap();
    let input = moments_file(&dir, mu.values());
    let out = run(&["compare", s(&input), "--left", "0", "--right", "20", "--output-format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["total_variation"].as_f64().unwrap() <= 1e-3);

    // A tolerance below the achieved distance flips the exit code.
    let out = run(&["compare", s(&input), "--left", "0", "--right", "20", "--tv-tol", "0"]);
    let text = stdout(&out);
    let exact = text.contains("total variation: 0e0");
    assert_eq!(out.status.code(), Some(if exact { 0 } else { 4 }), "{text}");

    let input = moments_file(&dir, &[1.0]);
    let out = run(&["compare", s(&input), "--left", "0", "--right", "9", "--output-format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["total_variation"].as_f64(), Some(0.0));

    let input = moments_file(&dir, &[1.0, 5.0]);
    let out = run(&["compare", s(&input), "--left", "0", "--right", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("infeasible on window"), "{}", stderr(&out));
}

#[test]
fn invalid_flags_are_rejected() {
    let dir = TempDir::new().unwrap();
    let input = moments_file(&dir, &[1.0, 1.0]);
    let out = run(&["reconstruct", s(&input), "--delta-prob=-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["reconstruct", s(&input), "--strategy", "bogus"]);
    assert_ne!(out.status.code(), Some(0));
}
