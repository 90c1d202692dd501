use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cqd::config::{preset, EstimatorConfig, ExperimentConfig, PRESETS};
use cqd::experiment::{run_config, ExperimentOutput};
use cqd::report::emit_plot;
use cqd::CqdError;

/// Classically corrected quantum dynamics experiments.
#[derive(Parser)]
#[command(name = "cqd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and CQD_OUTPUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in experiments.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
        /// Estimate with this many shots per measurement basis.
        #[arg(long, conflicts_with = "exact")]
        shots: Option<usize>,
        /// Use exact expectation values.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        total_time: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved config instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Render a comparison CSV as an SVG line plot.
    Plot { csv: PathBuf, svg: PathBuf },
    /// Check a config file and list every problem found.
    Validate { config: PathBuf },
}

fn report_failure(e: &CqdError) -> ExitCode {
    match e {
        CqdError::InvalidConfig(issues) => {
            eprintln!("invalid config:");
            for issue in issues {
                eprintln!("  {issue}");
            }
            ExitCode::from(2)
        }
        e => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> ExitCode {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.resolve_dir());
    match run_config(cfg, &dir) {
        Ok(output) => summarize(&output),
        Err(e) => report_failure(&e),
    }
}

fn summarize(output: &ExperimentOutput) -> ExitCode {
    for f in &output.files {
        println!("{}", f.display());
    }
    if output.failures.is_empty() {
        return ExitCode::SUCCESS;
    }
    for (variant, e) in &output.failures {
        eprintln!("{variant} stopped early: {e}");
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, out } => match ExperimentConfig::load(&config) {
            Ok(cfg) => execute(&cfg, out.as_deref()),
            Err(e) => report_failure(&e),
        },
        Command::Preset {
            name,
            shots,
            exact,
            total_time,
            out,
            print_config,
        } => {
            let mut cfg = match preset(&name) {
                Ok(c) => c,
                Err(e) => return report_failure(&e),
            };
            if exact {
                cfg.estimator = EstimatorConfig::exact();
            } else if let Some(n) = shots {
                let e = &cfg.estimator;
                cfg.estimator = EstimatorConfig::shots(n, e.bath_samples, e.master_seed);
            }
            if let Some(t) = total_time {
                cfg.total_time = t;
            }
            if let Err(e) = cfg.validate() {
                return report_failure(&e);
            }
            if print_config {
                return match cfg.to_json() {
                    Ok(text) => {
                        println!("{text}");
                        ExitCode::SUCCESS
                    }
                    Err(e) => report_failure(&e),
                };
            }
            execute(&cfg, out.as_deref())
        }
        Command::Plot { csv, svg } => match emit_plot(&csv, &svg) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => report_failure(&e),
        },
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => report_failure(&e),
        },
    }
}
