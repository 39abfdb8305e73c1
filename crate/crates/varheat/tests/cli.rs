use std::path::Path;
use std::process::Command;

fn varheat(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_varheat"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn kernel_check_reports_small_normalization_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = varheat(&["--out", s(dir.path()), "kernel-check", "--alpha", "2", "--t", "1"]);
    assert_eq!(code, 0, "{err}");
    let v = json(&dir.path().join("kernel_check.json"));
    assert!(v["report"]["normalization_error"].as_f64().unwrap() < 1e-6);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "kernel-check");
    assert_eq!(m["outputs"][0], "kernel_check.json");
    assert_eq!(m["spec_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = varheat(&[
        "--out",
        s(dir.path()),
        "variation",
        "--kind",
        "quad",
        "--input",
        "missing.csv",
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_two() {
    let (code, _, err) = varheat(&["sample", "--no-such-flag"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"));
}

/// The statistic of a path read back from disk equals the in-memory one bit for bit.
#[test]
fn sample_then_variation_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let common = ["--process", "spde", "--alpha", "1.5", "--sigma", "sin:1,0.5,1", "--n", "64", "--n-space", "256"];
    let mut args = vec!["--seed", "5", "--out", s(&a), "sample"];
    args.extend(common);
    assert_eq!(varheat(&args).0, 0);
    let input = a.join("path.csv");
    let (code, _, err) = varheat(&[
        "--out", s(&b), "variation", "--kind", "quad", "--alpha", "1.5", "--input", s(&input),
    ]);
    assert_eq!(code, 0, "{err}");
    let mut args = vec!["--seed", "5", "--out", s(&c), "variation", "--kind", "quad", "--simulate", "true"];
    args.extend(common);
    let (code, _, err) = varheat(&args);
    assert_eq!(code, 0, "{err}");
    let from_file = std::fs::read_to_string(b.join("variation.csv")).unwrap();
    let in_memory = std::fs::read_to_string(c.join("variation.csv")).unwrap();
    assert_eq!(from_file, in_memory);
    assert!(from_file.starts_with("kind,N,alpha_or_h,p,statistic\nquad_renorm,64,1.5,2.0,"));
}

#[test]
fn json_format_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(varheat(&["--format", "json", "--out", s(&a), "sample", "--process", "fbm", "--n", "128"]).0, 0);
    let (code, _, err) = varheat(&[
        "--format", "json", "--out", s(&b), "variation", "--kind", "fbm", "--hurst", "0.25",
        "--input", s(&a.join("path.json")),
    ]);
    assert_eq!(code, 0, "{err}");
    let v = json(&b.join("variation.json"));
    assert_eq!(v["kind"], "fbm_norm");
    assert_eq!(v["grid_n"], 128);
}

#[test]
fn estimate_alpha_from_exact_linear_path() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = varheat(&[
        "--seed", "7", "--out", s(dir.path()), "estimate", "--target", "alpha", "--process", "u0",
        "--alpha", "2", "--n", "16384",
    ]);
    assert_eq!(code, 0, "{err}");
    let v = json(&dir.path().join("estimate.json"));
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["a_n", "constants", "estimate", "method", "n", "riemann_sum", "statistic", "target"]);
    assert_eq!(v["target"], "alpha");
    assert_eq!(v["method"], "log_ratio");
    let e = v["estimate"].as_f64().unwrap();
    // finite-N bias log(C_0^2)/log N is about +0.27 at this N
    assert!(e > 1.9 && e < 2.4, "{e}");
}

#[test]
fn theta_estimates_write_constants() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = varheat(&[
        "--out", s(dir.path()), "estimate", "--target", "theta2", "--process", "spde", "--alpha", "2",
        "--theta", "2", "--n", "256", "--n-space", "512",
    ]);
    assert_eq!(code, 0, "{err}");
    let v = json(&dir.path().join("estimate.json"));
    assert!(v["constants"]["b0"].as_f64().unwrap() > 0.0);
    assert!(v["constants"].get("c0").is_none());
    assert!(v.get("a_n").is_none());
}

#[test]
fn config_file_fills_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\n[sample]\nprocess = \"fbm\"\nn = 32\nhurst = 0.3\n").unwrap();
    let out = dir.path().join("o");
    let (code, _, err) = varheat(&["--config", s(&cfg), "--out", s(&out), "sample", "--n", "64"]);
    assert_eq!(code, 0, "{err}");
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["spec"]["process"]["n"], 64);
    assert_eq!(m["config"]["spec"]["process"]["hurst"], 0.3);
    std::fs::write(&cfg, "[sample]\nbogus = 1\n").unwrap();
    assert_eq!(varheat(&["--config", s(&cfg), "--out", s(&out), "sample"]).0, 2);
}

fn assert_rerun_identical(first: &Path, second: &Path) {
    let (code, _, err) = varheat(&["--out", s(second), "rerun", "--manifest", s(&first.join("manifest.json"))]);
    assert_eq!(code, 0, "{err}");
    let m = json(&first.join("manifest.json"));
    let outputs = m["outputs"].as_array().unwrap();
    assert!(!outputs.is_empty());
    for o in outputs {
        let name = o.as_str().unwrap();
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let m2 = json(&second.join("manifest.json"));
    assert_eq!(m["spec_hash"], m2["spec_hash"]);
}

#[test]
fn rerun_from_manifest_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let (code, _, err) = varheat(&[
        "--seed", "3", "--out", s(&a), "sample", "--process", "spde", "--sigma", "affine:1,0.5",
        "--n", "32", "--n-space", "256", "--snapshot-every", "128",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(a.join("snapshots.bin").exists());
    assert_rerun_identical(&a, &dir.path().join("b"));

    let r = dir.path().join("r");
    let (code, _, err) = varheat(&[
        "--out", s(&r), "rate", "--target", "fbm_vn", "--n-grid", "32,64,128,256", "--reps", "100",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_rerun_identical(&r, &dir.path().join("r2"));
}

#[test]
fn rate_rejects_short_grids() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = varheat(&[
        "--out", s(dir.path()), "rate", "--target", "fbm_vn", "--n-grid", "32,64,128", "--reps", "100",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn prop4_check_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = varheat(&[
        "--out", s(dir.path()), "prop4-check", "--alpha", "2", "--delta-ladder", "0.015625,0.0078125",
        "--n-space", "256", "--log2-steps", "10", "--reps", "4",
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("prop4.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
