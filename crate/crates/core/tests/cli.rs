use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spingas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spingas"))
        .args(args)
        .env_remove("SPINGAS_WORKERS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn table2_prints_four_rows() {
    let out = spingas(&["table2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("28/29") || text.contains("0.9655"), "{text}");
}

#[test]
fn small_sweep_writes_csv_manifest_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[sweep]\nkind = \"rates\"\nx_min = 1.0\nx_max = 4.0\nnx = 2\ny_min = 1.0\ny_max = 5.0\nny = 2\n",
    )
    .unwrap();
    let csv = dir.path().join("grid.csv");
    let json = dir.path().join("grid.json");
    let out = spingas(&["--config", path(&cfg), "--workers", "1", "sweep", "--out", path(&csv), "--json", path(&json)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 5, "{text}");
    assert!(rows[0].starts_with("n,phi,J_over_Gamma"));
    assert!(dir.path().join("grid.manifest.json").exists());

    let cut = spingas(&["contour", "--input", path(&json), "--fixed-j", "4.0"]);
    assert!(cut.status.success(), "{}", String::from_utf8_lossy(&cut.stderr));
}

#[test]
fn missing_fit_input_is_an_io_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fit.json");
    let out = spingas(&["fit", "--input", "/nonexistent/series.csv", "--form", "beta", "--out", path(&out_path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_path.exists());
}

#[test]
fn config_errors_exit_with_code_two() {
    let out = spingas(&["--config", "/nonexistent/run.toml", "table2"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[relaxation]\ngamma_0 = \"-3 1/s\"\n").unwrap();
    let out = spingas(&["--config", path(&cfg), "table2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("relaxation.gamma_0"));
}

#[test]
fn fit_recovers_synthetic_beta() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    let mut text = String::from("x,m\n");
    for k in 0..40 {
        let x = 1.0 + 3.0 * k as f64 / 39.0;
        let m = if x > 1.6 { (1.0 - 1.6 / x).sqrt() } else { 0.0 };
        text += &format!("{x},{m}\n");
    }
    fs::write(&input, text).unwrap();
    let out_path = dir.path().join("fit.json");
    let out = spingas(&["fit", "--input", path(&input), "--form", "beta", "--out", path(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let beta = v["result"]["exponent"].as_f64().unwrap();
    assert!((beta - 0.5).abs() < 1e-6, "{v}");
}
