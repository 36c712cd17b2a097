use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resoflow::lab::ExperimentConfig;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resoflow"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

#[test]
fn bundled_config_file_matches_the_built_in_model() {
    let loaded = ExperimentConfig::load(&config_path()).unwrap();
    assert_eq!(loaded.hash(), ExperimentConfig::default_model().hash());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(
        run(&["resonances", "--no-such-flag"]).status.code(),
        Some(2)
    );
}

#[test]
fn increasing_hbar_list_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "resonances",
        "--hbar",
        "0.1,0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resonance_index_out_of_range_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "flow",
        "--hbar",
        "0.2",
        "--eres",
        "99",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resonance_listing_is_deterministic() {
    let cfg = config_path();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, fmt) in [(&a, "csv"), (&b, "csv"), (&a, "json"), (&b, "json")] {
        let out = run(&[
            "resonances",
            "--config",
            cfg.to_str().unwrap(),
            "--hbar",
            "0.2,0.15",
            "--format",
            fmt,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ["resonances.csv", "resonances.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("resonances.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("hbar,e_res,multiplicity,channels,isolation")
    );
    assert!(lines.count() >= 4);
}

#[test]
fn flow_across_the_lowest_resonance_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "flow",
        "--hbar",
        "0.2",
        "--eres",
        "0",
        "--theta",
        "3.14159",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["flow"]["flow"], 1);
    assert_eq!(v["resonance"]["multiplicity"], 1);
    assert!(dir.path().join("flow.json").exists());
}

#[test]
fn theta_on_an_eigenvalue_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "flow",
        "--hbar",
        "0.2",
        "--eres",
        "0",
        "--theta",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not admissible"));
}

#[test]
fn bs_count_at_one_energy_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bs-count",
        "--hbar",
        "0.2",
        "--energy",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().nth(1).unwrap().ends_with(",true"));
}
