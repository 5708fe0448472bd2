//! Scenario runs that write their results to disk: single runs, parameter
//! sweeps and the single-hop vs two-hop comparison.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::metrics::{summarize, RunSummary};
use crate::output::{self, fmt_opt};
use crate::scalar::Scalar;
use crate::sim::{self, ConfigError, ScenarioConfig, SimError, SimOutcome};
use crate::Exact;

/// Environment variable that replaces the scenario seed when set.
pub const SEED_ENV: &str = "CHRONOSIM_SEED";

pub const TRACE_FILE: &str = "trace.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const COMPARE_FILE: &str = "compare.csv";

/// Arithmetic used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    F64,
    /// Big rationals: no roundoff, much slower.
    Exact,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    BadConfig {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("usage: {0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a scenario file, then applies `CHRONOSIM_SEED` and the `--set`
/// overrides, in that order.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut cfg: ScenarioConfig = text.parse().map_err(|source| ExperimentError::BadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.set("seed", seed.trim())
            .map_err(|m| ExperimentError::Usage(format!("{SEED_ENV}: {m}")))?;
    }
    for o in overrides {
        cfg.apply_override(o).map_err(ExperimentError::Usage)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunFiles {
    pub trace: PathBuf,
    pub series: PathBuf,
    pub summary: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub summary: RunSummary,
    pub files: RunFiles,
}

impl RunReport {
    pub fn render_text(&self, title: &str) -> String {
        let mut s = output::render_summary(title, &self.summary);
        s.push_str(&format!(
            "  {:<24}{}\n",
            "trace",
            self.files.trace.display()
        ));
        s.push_str(&format!(
            "  {:<24}{}\n",
            "series",
            self.files.series.display()
        ));
        s
    }

    /// Single-line machine-readable form.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Simulates `cfg` and writes trace, series and summary files into `out_dir`.
pub fn execute(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    backend: Backend,
) -> Result<RunReport, ExperimentError> {
    match backend {
        Backend::F64 => write_run(cfg, &sim::run::<f64>(cfg)?, out_dir),
        Backend::Exact => write_run(cfg, &sim::run::<Exact>(cfg)?, out_dir),
    }
}

fn write_run<T: Scalar>(
    cfg: &ScenarioConfig,
    outcome: &SimOutcome<T>,
    out_dir: &Path,
) -> Result<RunReport, ExperimentError> {
    let summary = summarize(outcome, false);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = RunFiles {
        trace: out_dir.join(TRACE_FILE),
        series: out_dir.join(SERIES_FILE),
        summary: out_dir.join(SUMMARY_FILE),
    };
    let trace = output::trace_csv(outcome).map_err(io_err(&files.trace))?;
    output::write_atomic(&files.trace, &trace).map_err(io_err(&files.trace))?;
    let series = output::series_csv(outcome).map_err(io_err(&files.series))?;
    output::write_atomic(&files.series, &series).map_err(io_err(&files.series))?;

    #[derive(Serialize)]
    struct Doc<'a> {
        config: &'a ScenarioConfig,
        summary: &'a RunSummary,
    }
    let mut doc = serde_json::to_vec_pretty(&Doc {
        config: cfg,
        summary: &summary,
    })
    .expect("summary serializes");
    doc.push(b'\n');
    output::write_atomic(&files.summary, &doc).map_err(io_err(&files.summary))?;

    Ok(RunReport {
        config: cfg.clone(),
        summary,
        files,
    })
}

pub fn cmd_run(
    config_path: &Path,
    out_dir: &Path,
    overrides: &[String],
    backend: Backend,
) -> Result<RunReport, ExperimentError> {
    let cfg = load_config(config_path, overrides)?;
    execute(&cfg, out_dir, backend)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub param: String,
    pub points: Vec<(String, RunReport)>,
    pub combined: PathBuf,
}

impl SweepReport {
    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{:<20}{:>16}{:>16}{:>16}\n",
            self.param, "mse_end_to_end", "mse_sensor_hop", "mse_gateway_hop"
        );
        let short = |v: Option<f64>| {
            v.map(|x| format!("{x:.6e}"))
                .unwrap_or_else(|| "n/a".into())
        };
        for (v, r) in &self.points {
            s.push_str(&format!(
                "{:<20}{:>16}{:>16}{:>16}\n",
                v,
                short(r.summary.mse_end_to_end),
                short(r.summary.mse_sensor_hop),
                short(r.summary.mse_gateway_hop)
            ));
        }
        s.push_str(&format!("combined: {}\n", self.combined.display()));
        s
    }
}

/// Runs the scenario once per value of `param`. Every value is validated
/// before anything runs.
pub fn sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[String],
    out_dir: &Path,
    backend: Backend,
) -> Result<SweepReport, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Usage(
            "sweep needs at least one value".into(),
        ));
    }
    let mut configs = Vec::with_capacity(values.len());
    let mut problems = Vec::new();
    for v in values {
        let mut cfg = base.clone();
        match cfg.set(param, v.trim()) {
            Err(m) => problems.push(m),
            Ok(()) => match cfg.validate() {
                Err(e) => problems.extend(
                    e.violations()
                        .into_iter()
                        .map(|p| format!("{param}={v}: {p}")),
                ),
                Ok(()) => configs.push((v.trim().to_string(), cfg)),
            },
        }
    }
    if !problems.is_empty() {
        return Err(ConfigError::Invalid(problems).into());
    }

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let points = configs
        .into_par_iter()
        .map(|(v, cfg)| {
            let dir = out_dir.join(format!("{param}={v}"));
            execute(&cfg, &dir, backend).map(|r| (v, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let combined = out_dir.join(SWEEP_FILE);
    let mut w = output::csv_writer();
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record([param, "mse_end_to_end", "mse_sensor_hop", "mse_gateway_hop"])?;
        for (v, r) in &points {
            w.write_record([
                v.clone(),
                fmt_opt(r.summary.mse_end_to_end),
                fmt_opt(r.summary.mse_sensor_hop),
                fmt_opt(r.summary.mse_gateway_hop),
            ])?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(&combined)(e.into()))?;
    let bytes = output::finish(w).map_err(io_err(&combined))?;
    output::write_atomic(&combined, &bytes).map_err(io_err(&combined))?;

    Ok(SweepReport {
        param: param.to_string(),
        points,
        combined,
    })
}

pub fn cmd_sweep(
    config_path: &Path,
    param: &str,
    values: &[String],
    out_dir: &Path,
    overrides: &[String],
    backend: Backend,
) -> Result<SweepReport, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Usage(
            "sweep needs at least one value".into(),
        ));
    }
    let cfg = load_config(config_path, overrides)?;
    sweep(&cfg, param, values, out_dir, backend)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub two_hop: RunReport,
    pub single_hop: RunReport,
    /// Two-hop over single-hop end-to-end MSE.
    pub mse_ratio: Option<f64>,
    pub combined: PathBuf,
}

impl CompareReport {
    pub fn render_text(&self) -> String {
        let mut s = self.two_hop.render_text("two-hop");
        s.push_str(&self.single_hop.render_text("single-hop"));
        let ratio = self
            .mse_ratio
            .map(|r| format!("{r:.6}"))
            .unwrap_or_else(|| "n/a".into());
        s.push_str(&format!("  {:<24}{:>16}\n", "mse ratio two/single", ratio));
        s
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Runs a two-hop scenario and its gateway-free counterpart with the same
/// seed.
pub fn compare(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    backend: Backend,
) -> Result<CompareReport, ExperimentError> {
    if cfg.hops() != 2 {
        return Err(ExperimentError::Usage(format!(
            "compare needs a two-hop chain (head, gateway, sensor), got {} hop(s)",
            cfg.hops()
        )));
    }
    let single_cfg = cfg.single_hop();
    let (two_hop, single_hop) = rayon::join(
        || execute(cfg, &out_dir.join("two_hop"), backend),
        || execute(&single_cfg, &out_dir.join("single_hop"), backend),
    );
    let (two_hop, single_hop) = (two_hop?, single_hop?);
    let mse_ratio = match (
        two_hop.summary.mse_end_to_end,
        single_hop.summary.mse_end_to_end,
    ) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        (Some(a), Some(_)) if a <= 0.0 => Some(1.0),
        _ => None,
    };

    let combined = out_dir.join(COMPARE_FILE);
    let mut w = output::csv_writer();
    let rows = [("two_hop", &two_hop), ("single_hop", &single_hop)];
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record([
            "scenario",
            "hops",
            "delivered",
            "warm_delivered",
            "mse_end_to_end",
            "mse_sensor_hop",
            "mse_gateway_hop",
        ])?;
        for (name, r) in rows {
            let s = &r.summary;
            w.write_record([
                name.to_string(),
                s.hops.to_string(),
                s.delivered.to_string(),
                s.warm_delivered.to_string(),
                fmt_opt(s.mse_end_to_end),
                fmt_opt(s.mse_sensor_hop),
                fmt_opt(s.mse_gateway_hop),
            ])?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| io_err(&combined)(e.into()))?;
    let bytes = output::finish(w).map_err(io_err(&combined))?;
    output::write_atomic(&combined, &bytes).map_err(io_err(&combined))?;

    Ok(CompareReport {
        two_hop,
        single_hop,
        mse_ratio,
        combined,
    })
}

pub fn cmd_compare(
    config_path: &Path,
    out_dir: &Path,
    overrides: &[String],
    backend: Backend,
) -> Result<CompareReport, ExperimentError> {
    let cfg = load_config(config_path, overrides)?;
    compare(&cfg, out_dir, backend)
}
