use std::path::Path;
use std::process::{Command, Output};

use integrable_cli::{report_render, DriftReport, DriftRow, Experiment, ExperimentConfig, Format, RunMetadata};
use proptest::prelude::*;

fn integrable(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_integrable"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_report(dir: &Path) -> DriftReport {
    DriftReport::from_json(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn empty_csv_report_is_just_the_header() {
    let out = String::from_utf8(report_render(&DriftReport::default(), Format::Csv)).unwrap();
    assert_eq!(out.trim_end(), "name,initial,max_drift,threshold,pass");
}

#[test]
fn text_rows_end_in_status() {
    let mut r = DriftReport::default();
    r.rows.push(DriftRow::new("energy", 1.0, 1e-12, 1e-8));
    r.rows.push(DriftRow::new("casimir", 2.0, f64::NAN, 1e-8));
    let out = String::from_utf8(report_render(&r, Format::Text)).unwrap();
    let lines: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with("PASS"));
    assert!(lines[1].ends_with("FAIL"));
}

proptest! {
    #[test]
    fn json_report_round_trips(
        rows in prop::collection::vec(("[a-z ]{0,12}", -1e6f64..1e6, 0.0f64..1.0, 1e-12f64..1.0), 0..6),
        seed in any::<u64>(),
        steps in any::<u64>(),
    ) {
        let r = DriftReport {
            metadata: RunMetadata { experiment: "catmap".into(), config_hash: "ab".into(), seed, steps, wall_time_s: 0.5 },
            rows: rows.into_iter().map(|(n, i, d, t)| DriftRow::new(n, i, d, t)).collect(),
            ..DriftReport::default()
        };
        let back = DriftReport::from_json(&report_render(&r, Format::Json)).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn config_round_trips(seed in 0..=i64::MAX as u64, tol in 1e-14f64..1.0, steps in prop::option::of(1usize..1000), jobs in 1usize..8) {
        let mut cfg = ExperimentConfig::new(Experiment::Neumann);
        cfg.seed = seed;
        cfg.tol = tol;
        cfg.steps = steps;
        cfg.jobs = jobs;
        cfg.params.insert("tau_end".into(), toml::Value::Float(2.5));
        cfg.params.insert("b".into(), toml::Value::Array(vec![1.into(), "3/2".into(), 4.into()]));
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn non_finite_rows_survive_json() {
    let mut r = DriftReport::default();
    r.rows.push(DriftRow::new("x", f64::INFINITY, f64::NAN, f64::NEG_INFINITY));
    let back = DriftReport::from_json(&report_render(&r, Format::Json)).unwrap();
    assert_eq!(back.rows[0].initial, f64::INFINITY);
    assert!(back.rows[0].max_drift.is_nan());
    assert_eq!(back.rows[0].threshold, f64::NEG_INFINITY);
}

#[test]
fn parameters_may_sit_at_top_level() {
    let a = ExperimentConfig::from_toml("experiment = \"knoerrer\"\nb = [1.0, 2.0]\n").unwrap();
    let b = ExperimentConfig::from_toml("experiment = \"knoerrer\"\n[params]\nb = [1.0, 2.0]\n").unwrap();
    assert_eq!(a, b);
    assert!(ExperimentConfig::from_toml("experiment = \"knoerrer\"\nb = 1\n[params]\nb = 2\n").is_err());
}

#[test]
fn hash_ignores_presentation_settings() {
    let mut a = ExperimentConfig::new(Experiment::Catmap);
    let mut b = a.clone();
    b.format = Format::Json;
    b.jobs = 4;
    b.output = Some("elsewhere".into());
    assert_eq!(a.hash(), b.hash());
    a.seed = 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "tol = [unterminated\n");
    let out = integrable(tmp.path(), &["catmap", "--config", &cfg, "--output", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
    assert!(!tmp.path().join("results").exists());

    let cfg = write(tmp.path(), "unknown.toml", "[params]\nmatirx = [[2, 1], [1, 1]]\n");
    let out = integrable(tmp.path(), &["catmap", "--config", &cfg, "--output", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matirx"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn oversized_seed_is_rejected() {
    let mut cfg = ExperimentConfig::new(Experiment::Catmap);
    cfg.seed = u64::MAX;
    assert!(cfg.validate().is_err());
}

#[test]
fn wrong_experiment_in_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "experiment = \"bachet\"\n");
    let out = integrable(tmp.path(), &["catmap", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn euler_top_conserves_with_and_without_modulation() {
    let tmp = tempfile::tempdir().unwrap();
    for (amp, dir) in [("0", "still"), ("0.3", "driven")] {
        let cfg = write(tmp.path(), "top.toml", &format!("[params]\nn = 3\nt_end = 5\nf_amplitude = {amp}\n"));
        let out = integrable(tmp.path(), &["euler-top", "--config", &cfg, "--output", dir]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        let r = read_report(&tmp.path().join(dir));
        assert!(r.passed());
        assert!(r.rows.len() >= 3);
    }
}

#[test]
fn bachet_chain_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = integrable(tmp.path(), &["bachet", "--c=-2", "--start=3,5", "--steps", "2", "--format", "csv", "--output", "b"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("b/trajectory.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][1], "129/100");
    assert_eq!(rows[1][2].trim_start_matches('-'), "383/1000");
    assert_eq!(rows[2][1], "2340922881/58675600");
    assert_eq!(rows[2][2].trim_start_matches('-'), "113259286337279/449455096000");
}

#[test]
fn failing_row_sets_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.toml", "steps = 1\n[params]\nexpected_abs_y = [\"5\", \"1\"]\n");
    let out = integrable(tmp.path(), &["bachet", "--config", &cfg, "--output", "b"]);
    assert_eq!(out.status.code(), Some(1));
    let r = read_report(&tmp.path().join("b"));
    assert!(!r.passed());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["one", "two"] {
        let out = integrable(tmp.path(), &["bachet", "--steps", "3", "--output", dir]);
        assert_eq!(out.status.code(), Some(0));
        let out = integrable(tmp.path(), &["catmap", "--seed", "7", "--output", &format!("{dir}/cat")]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["chain.json", "trajectory.csv", "cat/trajectory.csv"] {
        let a = std::fs::read(tmp.path().join("one").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("two").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let a = read_report(&tmp.path().join("one"));
    let b = read_report(&tmp.path().join("two"));
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.metadata.config_hash, b.metadata.config_hash);
}

#[test]
fn jobs_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    for (jobs, dir) in [("1", "serial"), ("4", "parallel")] {
        let out = integrable(tmp.path(), &["oscillator", "--jobs", jobs, "--output", dir]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(tmp.path().join("serial/trajectory.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("parallel/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(read_report(&tmp.path().join("serial")).rows, read_report(&tmp.path().join("parallel")).rows);
}

#[test]
fn every_default_run_passes() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["catmap", "geodesic", "neumann", "projective-chart"] {
        let out = integrable(tmp.path(), &[cmd, "--output", cmd]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stdout));
    }
}
