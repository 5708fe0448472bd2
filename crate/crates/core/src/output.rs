//! CSV and summary serialization.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::metrics::RunSummary;
use crate::scalar::Scalar;
use crate::sim::SimOutcome;

pub const TRACE_HEADER: [&str; 13] = [
    "measurement_id",
    "t_m_s",
    "warm_up",
    "theta_est_gs_s",
    "d_est_gs_s",
    "theta_est_hg_s",
    "d_est_hg_s",
    "r_hat_gs",
    "r_hat_hg",
    "t_scfr_once_s",
    "t_scfr_twice_s",
    "err_once_s",
    "err_twice_s",
];

pub const SERIES_HEADER: [&str; 6] = ["hop", "t_s", "r_hat", "r_true", "freq_diff", "warm_up"];

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub fn finish(w: csv::Writer<Vec<u8>>) -> io::Result<Vec<u8>> {
    w.into_inner().map_err(|e| e.into_error())
}

/// One row per delivered report. The `gs` columns describe the sensor-side
/// hop and the `hg` columns the head-side hop; on a single-hop chain both
/// describe the same hop.
pub fn trace_csv<T: Scalar>(outcome: &SimOutcome<T>) -> io::Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(TRACE_HEADER)?;
    for r in &outcome.records {
        let gs = &r.sensor_hop().estimate;
        let hg = &r.head_hop().estimate;
        let mut row = vec![r.measurement_id.to_string()];
        row.push(fmt_num(r.t_m.approx()));
        row.push(r.warm_up().to_string());
        for v in [
            &gs.theta_est,
            &gs.delay_est,
            &hg.theta_est,
            &hg.delay_est,
            &gs.ratio_used,
            &hg.ratio_used,
            &r.t_scfr_once,
            &r.t_scfr_twice,
            &r.err_once,
            &r.err_twice,
        ] {
            row.push(fmt_num(v.approx()));
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// One row per beacon arrival.
pub fn series_csv<T: Scalar>(outcome: &SimOutcome<T>) -> io::Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(SERIES_HEADER)?;
    for s in &outcome.ratio_series {
        let diff = s.r_hat.clone() - s.r_true.clone();
        w.write_record([
            outcome.link_labels[s.link].clone(),
            fmt_num(s.at.approx()),
            fmt_num(s.r_hat.approx()),
            fmt_num(s.r_true.approx()),
            fmt_num(diff.approx()),
            s.warm_up.to_string(),
        ])?;
    }
    finish(w)
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    use std::io::Write;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn fmt_short(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}"))
        .unwrap_or_else(|| "n/a".into())
}

/// Aligned, human-readable summary block.
pub fn render_summary(title: &str, s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let rows = [
        ("hops", s.hops.to_string()),
        ("generated", s.generated.to_string()),
        ("delivered", s.delivered.to_string()),
        ("undelivered", s.undelivered.to_string()),
        ("warm delivered", s.warm_delivered.to_string()),
        ("mse end-to-end [s^2]", fmt_short(s.mse_end_to_end)),
        ("mse sensor hop [s^2]", fmt_short(s.mse_sensor_hop)),
        ("mse gateway hop [s^2]", fmt_short(s.mse_gateway_hop)),
        ("max |err_twice| [s]", fmt_short(s.max_abs_err_twice)),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "  {k:<24}{v:>16}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.671114076050701e-7, -1e-300, 120.0, 0.0] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn atomic_write_to_missing_dir_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_atomic(&dir.path().join("nope/x.csv"), b"").is_err());
    }
}
