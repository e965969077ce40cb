use std::path::Path;
use std::process::{Command, Output};

use xfl::config::DesignConfig;
use xfl::ladder::simulate;
use xfl::metrics::FilterMetrics;
use xfl::touchstone::parse_touchstone;

fn xfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xfl")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = xfl(&args);
    assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(xfl(&[]).status.code(), Some(2));
    assert_eq!(xfl(&["filter", "--bogus"]).status.code(), Some(2));
    assert_eq!(xfl(&["nonsense"]).status.code(), Some(2));
    assert_eq!(xfl(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 2}"#).unwrap();
    let out = xfl(&["filter", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = dir.path().join("missing.s1p");
    let out = xfl(&["fit", "--data", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn filter_artifacts_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "filter", &[]);

    let resolved = DesignConfig::bundled().resolve().unwrap();
    let expected = simulate(&resolved.filter().unwrap(), &resolved.config.sweep).unwrap();
    let text = std::fs::read_to_string(dir.path().join("filter.s2p")).unwrap();
    let sweep = parse_touchstone(&text).unwrap().into_sweep().unwrap();
    assert_eq!(sweep.len(), expected.len());
    for (a, b) in sweep.s21.iter().zip(&expected.s21) {
        assert!((a - b).norm() < 1e-10);
    }

    let metrics: FilterMetrics =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert!((metrics.f_center_ghz - 49.26).abs() < 0.05, "{metrics:?}");
    assert!(metrics.fbw_3db_pct > 2.0 && metrics.fbw_3db_pct < 4.5);

    let csv = std::fs::read_to_string(dir.path().join("filter.csv")).unwrap();
    assert!(csv.starts_with("frequency_ghz,s11_db,s21_db,s12_db,s22_db,s21_phase_deg\n"));
    assert_eq!(csv.lines().count(), expected.len() + 1);
}

#[test]
fn stack_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "stack", &[]);
    let mut reader = csv::Reader::from_path(dir.path().join("stack_table.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let row = |name: &str| rows.iter().find(|r| &r[0] == name).unwrap().clone();
    let f = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();

    let shunt = row("shunt");
    assert_eq!(&shunt[3], "12");
    assert!((f(&shunt, 5) - 47.7).abs() < 0.5);
    assert!((15.0..=17.5).contains(&f(&shunt, 7)));
    let single = row("single_layer");
    assert!((3.5..=4.5).contains(&f(&single, 7)));
    assert!(f(&single, 6).abs() > 3.5 * f(&shunt, 6).abs());
    assert!(dir.path().join("dispersion.csv").exists());
}

#[test]
fn fit_reads_its_own_touchstone() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "resonator", &[]);
    let data = dir.path().join("measured_shunt.s1p");
    let out = tempfile::tempdir().unwrap();
    run_in(out.path(), "fit", &["--data", data.to_str().unwrap()]);
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("fit.json")).unwrap()).unwrap();
    let spec = &fit["result"]["spec"];
    assert!((spec["fs_ghz"].as_f64().unwrap() - 47.7).abs() < 0.05, "{fit}");
    assert!((spec["k2"].as_f64().unwrap() - 0.0256).abs() < 0.001, "{fit}");
    assert!((spec["q"].as_f64().unwrap() - 22.0).abs() < 1.0, "{fit}");
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        for sub in ["stack", "resonator", "filter", "tolerance", "report"] {
            run_in(dir, sub, &["--seed", "99"]);
        }
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert!(sa.len() > 10);
    assert_eq!(sa, sb);
}

#[test]
fn seed_changes_monte_carlo_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_in(a.path(), "tolerance", &["--seed", "1"]);
    run_in(b.path(), "tolerance", &["--seed", "2"]);
    let read = |d: &Path| std::fs::read(d.join("tolerance_single_layer.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}
