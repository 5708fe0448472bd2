use std::path::PathBuf;
use std::process::ExitCode;

use chronosim::experiment::{self, Backend, ExperimentError};
use clap::{Args, Parser, Subcommand};

/// Multi-hop sensor network time synchronization simulator.
#[derive(Debug, Parser)]
#[command(name = "chronosim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file.
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override a top-level setting, e.g. `--set seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Also print the summary as a single JSON line.
    #[arg(long)]
    json: bool,
    /// Simulate in exact rational arithmetic.
    #[arg(long)]
    exact: bool,
}

impl Common {
    fn backend(&self) -> Backend {
        if self.exact {
            Backend::Exact
        } else {
            Backend::F64
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write trace, series and summary files.
    Run(Common),
    /// Run the scenario once per parameter value.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "beacon_interval_s")]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<String>,
    },
    /// Run a two-hop scenario and its direct single-hop counterpart.
    Compare(Common),
}

fn dispatch(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run(c) => {
            let report = experiment::cmd_run(&c.config, &c.out, &c.overrides, c.backend())?;
            print!("{}", report.render_text("run"));
            if c.json {
                println!("{}", report.to_json_line());
            }
        }
        Command::Sweep {
            common: c,
            param,
            values,
        } => {
            let values: Vec<String> = values
                .into_iter()
                .filter(|v| !v.trim().is_empty())
                .collect();
            let report = experiment::cmd_sweep(
                &c.config,
                &param,
                &values,
                &c.out,
                &c.overrides,
                c.backend(),
            )?;
            print!("{}", report.render_text());
            if c.json {
                for (_, r) in &report.points {
                    println!("{}", r.to_json_line());
                }
            }
        }
        Command::Compare(c) => {
            let report = experiment::cmd_compare(&c.config, &c.out, &c.overrides, c.backend())?;
            print!("{}", report.render_text());
            if c.json {
                println!("{}", report.to_json_line());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                ExperimentError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
