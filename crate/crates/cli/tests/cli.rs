use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_holelab");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("HOLELAB_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const POISSON: &str = r#"{
    "spec": {"d": 3, "epsilon": 0.125, "process": "poisson", "lambda": 1.0,
             "marks": {"kind": "pareto", "beta_eff": 2.0},
             "domain": {"shape": "axis_cube", "half_width": 0.5}, "master_seed": 3},
    "replicates": 2
}"#;

#[test]
fn exponents_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["exponents", "--d", "3", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for (key, want) in [("delta", 0.8), ("rate", 0.3), ("k_exp", 0.4), ("kappa", 0.2)] {
        assert!((v[key].as_f64().unwrap() - want).abs() < 1e-12, "{key}: {}", v[key]);
    }
}

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", r#"{"replicate": 3}"#);
    let out = run(dir.path(), &["--config", "c.json", "sample"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicate"));
}

#[test]
fn missing_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["sample"]).status.code(), Some(2));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", POISSON);
    let out = run(
        dir.path(),
        &["--config", "c.json", "--out-dir", "o", "--dry-run", "partition"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("dry run"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", POISSON);
    for (out, seed) in [("a", "11"), ("b", "11"), ("c", "12")] {
        for cmd in ["sample", "partition"] {
            let o = run(
                dir.path(),
                &["--config", "c.json", "--out-dir", out, "--seed", seed, cmd],
            );
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let read = |d: &str, f: &str| std::fs::read(dir.path().join(d).join(f)).unwrap();
    for f in [
        "configuration_r0.csv",
        "configuration_r1.csv",
        "partition_r0.csv",
        "partition_report.json",
    ] {
        assert_eq!(read("a", f), read("b", f), "{f}");
    }
    assert_ne!(read("a", "configuration_r0.csv"), read("c", "configuration_r0.csv"));
}

#[test]
fn mecke_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--out-dir", "o", "mecke", "--trials", "1000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/mecke.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[test]
fn all_zero_rates_refuse_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{
        "spec": {"d": 3, "epsilon": 0.125, "process": "lattice",
                 "marks": {"kind": "constant", "value": 1.0},
                 "domain": {"shape": "axis_cube", "half_width": 0.25}},
        "replicates": 30, "epsilon_grid": [0.125, 0.0625, 0.03125, 0.015625]
    }"#,
    );
    let out = run(
        dir.path(),
        &[
            "--config",
            "c.json",
            "--out-dir",
            "o",
            "rates",
            "--quantity",
            "overlap_pairs",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit refused"));
}

#[test]
fn unknown_quantity_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", POISSON);
    let out = run(dir.path(), &["--config", "c.json", "rates", "--quantity", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
