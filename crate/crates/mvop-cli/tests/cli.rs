//! End-to-end tests of the `mvop` binary: subcommands, exit codes, file
//! formats and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn mvop(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvop"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn build_hermite2_exports_first_polynomial() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &["build", "--preset", "hermite2", "--t", "0", "--nmax", "8", "--out", "fam.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fam.json")).unwrap())
            .unwrap();
    // P_1 = x I + [[0, -1/3], [-1/2, 0]]
    let c0 = &doc["polys"][1][0];
    assert!((c0[0][1][0].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert!((c0[1][0][0].as_f64().unwrap() + 0.5).abs() < 1e-12);
    let c1 = &doc["polys"][1][1];
    assert!((c1[0][0][0].as_f64().unwrap() - 1.0).abs() == 0.0, "monic");
}

#[test]
fn build_scalar_hermite_c_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &["build", "--preset", "hermite1", "--t", "0", "--nmax", "6", "--out", "fam.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fam.json")).unwrap())
            .unwrap();
    for n in 1..=6 {
        let c = doc["recur_c"][n][0][0][0].as_f64().unwrap();
        assert!((c - n as f64 / 2.0).abs() < 1e-10, "C({n}) = {c}");
    }
}

#[test]
fn hermite_n_preset_takes_a_vector() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &["build", "--preset", "hermiteN", "--a", "1.0,0.5", "--nmax", "4", "--out", "fam.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fam.json")).unwrap())
            .unwrap();
    assert_eq!(doc["size"].as_u64(), Some(3));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"preset": "hermite2", "nmaxx": 8}"#)
        .unwrap();
    let out = mvop(&["build", "--config", "bad.json"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nmaxx"), "diagnostic names the field: {}", stderr(&out));
}

#[test]
fn verify_all_passes_on_hermite2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &["verify", "--preset", "hermite2", "--nmax", "8", "--t", "0.2", "--suite", "all", "--out", "report.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(doc["pass"], serde_json::Value::Bool(true));
    assert!(doc["checks"].as_array().unwrap().len() >= 8);
}

#[test]
fn verify_corrupted_band_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &[
            "verify", "--preset", "hermite2", "--nmax", "6", "--suite", "pearson",
            "--corrupt-band", "1e-3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL weak_pearson"));
}

#[test]
fn verify_lax_on_k2_scalar_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &["verify", "--preset", "hermite1-x2", "--nmax", "8", "--t", "0.3", "--suite", "lax"],
        dir.path(),
    );
    assert!(out.status.success(), "{}\n{}", stdout(&out), stderr(&out));
}

#[test]
fn evolve_scalar_b_column_is_minus_half_t() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &[
            "evolve", "--preset", "hermite1", "--t0", "0", "--t1", "1", "--steps", "50",
            "--nmax", "12", "--no-header", "--out", "traj.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let mut checked = 0;
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let t: f64 = fields[0].parse().unwrap();
        let m: i64 = fields[1].parse().unwrap();
        let re: f64 = fields[3].parse().unwrap();
        if m == 0 {
            assert!((re + t / 2.0).abs() < 1e-7, "B at t={t}: {re}");
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn evolve_rejects_zero_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &["evolve", "--preset", "hermite1", "--t0", "0", "--t1", "1", "--steps", "0"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("steps"));
}

#[test]
fn identical_configs_give_bit_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "evolve", "--preset", "hermite2", "--t0", "0", "--t1", "0.2", "--steps", "20",
        "--nmax", "8", "--no-header",
    ];
    let mut full1 = args.to_vec();
    full1.extend(["--out", "a.csv"]);
    let mut full2 = args.to_vec();
    full2.extend(["--out", "b.csv"]);
    assert!(mvop(&full1, dir.path()).status.success());
    assert!(mvop(&full2, dir.path()).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "outputs differ between identical runs");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"preset": "hermite2", "nmax": 4, "t": 0.1}"#,
    )
    .unwrap();
    // flag wins over the file's nmax
    let out = mvop(
        &["build", "--config", "run.json", "--nmax", "6", "--out", "fam.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fam.json")).unwrap())
            .unwrap();
    assert_eq!(doc["nmax"].as_u64(), Some(6));
    assert_eq!(doc["t"].as_f64(), Some(0.1));
}

#[test]
fn custom_moments_weight_builds_and_deforms() {
    let dir = tempfile::tempdir().unwrap();
    // scalar Gaussian moments, enough of them for the series deformation
    let mut moments = Vec::new();
    let mut even = std::f64::consts::PI.sqrt();
    for m in 0..40usize {
        if m % 2 == 1 {
            moments.push(vec![vec![0.0]]);
        } else {
            if m > 0 {
                even *= (m - 1) as f64 / 2.0;
            }
            moments.push(vec![vec![even]]);
        }
    }
    let cfg = serde_json::json!({
        "weight": {"type": "custom_moments", "moments": moments, "deformation": "x"},
        "nmax": 6,
        "t": 0.3
    });
    std::fs::write(dir.path().join("cm.json"), cfg.to_string()).unwrap();
    let out = mvop(
        &["build", "--config", "cm.json", "--out", "fam.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fam.json")).unwrap())
            .unwrap();
    // e^{-tx} deformation of the Gaussian: B(n;t) = -t/2
    let b0 = doc["recur_b"][0][0][0][0].as_f64().unwrap();
    assert!((b0 + 0.15).abs() < 1e-10, "B(0;0.3) = {b0}");
}

#[test]
fn operator_export_has_ordered_band_entries() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvop(
        &[
            "build", "--preset", "hermite2", "--nmax", "6", "--t", "0.1", "--out", "fam.json",
            "--operator-out", "op.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("op.json")).unwrap())
            .unwrap();
    assert_eq!(doc["bandwidth"].as_u64(), Some(1));
    let entries = doc["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    // G_1(n) = -A for the casimir deformation
    let first = entries.iter().find(|e| e["j"] == 1).unwrap();
    assert!((first["value"][1][0][0].as_f64().unwrap() + 1.0).abs() < 1e-10);
}
