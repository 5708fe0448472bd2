use std::fs;
use std::path::Path;

use chronosim::experiment::{self, Backend, ExperimentError};
use chronosim::output::{SERIES_HEADER, TRACE_HEADER};
use chronosim::ScenarioConfig;

const REFERENCE: &str = "\
horizon_s = 120
beacon_interval_s = 0.1
n_measurements = 100
seed = 3
processing_delay_a_s = 0

[node head]
ratio = 1.0
offset_s = 0.0

[node gateway]
ratio = 1.0001
offset_s = 1.0

[node sensor]
ratio = 1.0002
offset_s = 0.9

[link head gateway]
distance_m = 100

[link gateway sensor]
distance_m = 200
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("scenario.conf");
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|row| row.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), REFERENCE);
    let out = dir.path().join("out");
    let report = experiment::cmd_run(&cfg, &out, &[], Backend::F64).unwrap();
    assert_eq!(report.config, ScenarioConfig::default());
    assert_eq!(report.summary.generated, 100);
    assert_eq!(report.summary.delivered, 100);
    assert_eq!(report.summary.hops, 2);
    assert!(report.summary.mse_end_to_end.unwrap() <= 1e-8);

    let (header, rows) = read_csv(&report.files.trace);
    assert_eq!(header, TRACE_HEADER);
    assert_eq!(rows.len(), 100);
    for row in &rows {
        let err: f64 = row[12].parse().unwrap();
        assert!(err.abs() <= 1e-4);
    }
    let (header, rows) = read_csv(&report.files.series);
    assert_eq!(header, SERIES_HEADER);
    assert!(rows.iter().any(|r| r[0] == "gateway-head"));
    assert!(rows.iter().any(|r| r[0] == "sensor-gateway"));

    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(&report.files.summary).unwrap()).unwrap();
    assert_eq!(doc["summary"]["generated"], 100);
    assert_eq!(doc["config"]["seed"], 3);

    let line = report.to_json_line();
    assert!(!line.contains('\n'));
    assert!(report.render_text("run").contains("generated"));
}

#[test]
fn zero_measurements_gives_header_only_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), REFERENCE);
    let report =
        experiment::cmd_run(&cfg, dir.path(), &["n_measurements=0".into()], Backend::F64).unwrap();
    let text = fs::read_to_string(&report.files.trace).unwrap();
    assert_eq!(text, format!("{}\n", TRACE_HEADER.join(",")));
    assert_eq!(report.summary.mse_end_to_end, None);
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.conf");
    let err = experiment::cmd_run(&missing, dir.path(), &[], Backend::F64).unwrap_err();
    assert!(matches!(err, ExperimentError::Io { .. }));
    assert!(err.to_string().contains("nope.conf"));
}

#[test]
fn bad_config_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let text = REFERENCE
        .replace("horizon_s = 120", "horizon_s = -1")
        .replace("beacon_interval_s = 0.1", "beacon_interval_s = 0");
    let cfg = write_config(dir.path(), &text);
    let err = experiment::cmd_run(&cfg, dir.path(), &[], Backend::F64).unwrap_err();
    assert!(err.to_string().contains("scenario.conf"));
    match err {
        ExperimentError::BadConfig { source, .. } => assert_eq!(source.violations().len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_of_one_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = ScenarioConfig::default();
    let run = experiment::execute(&base, &dir.path().join("run"), Backend::F64).unwrap();
    let sweep = experiment::sweep(
        &base,
        "beacon_interval_s",
        &["0.1".into()],
        &dir.path().join("sweep"),
        Backend::F64,
    )
    .unwrap();
    assert_eq!(sweep.points.len(), 1);
    assert_eq!(
        sweep.points[0].1.summary.mse_end_to_end,
        run.summary.mse_end_to_end
    );
    assert!(dir
        .path()
        .join("sweep/beacon_interval_s=0.1/trace.csv")
        .exists());
    let (header, rows) = read_csv(&sweep.combined);
    assert_eq!(
        header,
        [
            "beacon_interval_s",
            "mse_end_to_end",
            "mse_sensor_hop",
            "mse_gateway_hop"
        ]
    );
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0.1");
}

#[test]
fn sweep_rejects_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let base = ScenarioConfig::default();
    let values = ["0.1".to_string(), "-0.2".into(), "abc".into()];
    let err =
        experiment::sweep(&base, "beacon_interval_s", &values, &out, Backend::F64).unwrap_err();
    match err {
        ExperimentError::Config(e) => assert_eq!(e.violations().len(), 2),
        other => panic!("{other:?}"),
    }
    assert!(!out.exists());

    let err = experiment::sweep(&base, "beacon_interval_s", &[], &out, Backend::F64).unwrap_err();
    assert!(matches!(err, ExperimentError::Usage(_)));
}

#[test]
fn compare_needs_two_hops() {
    let dir = tempfile::tempdir().unwrap();
    let single = ScenarioConfig::default().single_hop();
    let err = experiment::compare(&single, dir.path(), Backend::F64).unwrap_err();
    assert!(matches!(err, ExperimentError::Usage(_)));
}

#[test]
fn compare_with_identity_clocks() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default();
    for n in &mut cfg.nodes {
        n.ratio = 1.0;
        n.offset_s = 0.0;
    }
    let report = experiment::compare(&cfg, dir.path(), Backend::F64).unwrap();
    assert!(report.two_hop.summary.mse_end_to_end.unwrap() <= 1e-18);
    assert!(report.single_hop.summary.mse_end_to_end.unwrap() <= 1e-18);
    assert!(report.mse_ratio.unwrap().is_finite());
    let (_, rows) = read_csv(&report.combined);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "1");
    assert!(report.render_text().contains("mse ratio"));
}

#[test]
fn exact_backend_writes_zero_errors() {
    let dir = tempfile::tempdir().unwrap();
    let report =
        experiment::execute(&ScenarioConfig::default(), dir.path(), Backend::Exact).unwrap();
    assert_eq!(report.summary.mse_end_to_end, Some(0.0));
}
