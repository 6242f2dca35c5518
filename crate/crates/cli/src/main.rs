//! `nematic`: batch runs of the liquid-crystal laboratory driven by a TOML
//! config. Results go to the output directory as CSV, JSON and field
//! snapshots; errors go to stderr as a JSON record.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use error::CliError;

#[derive(Parser)]
#[command(name = "nematic", version, about = "Ericksen-Leslie liquid-crystal laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scheme; writes trace.csv and checkpoints.
    Simulate(Common),
    /// Evaluate the relative-energy certificate of a run against a test trajectory.
    Certify(Common),
    /// Recover a magnetic field from manufactured targets.
    Optimize(Common),
    /// Energy balance and coercivity diagnostics along a run.
    EnergyReport(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key.path=value`, applied in order on top of the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn execute(name: &str, args: &Common) -> Result<serde_json::Value, CliError> {
    let started = unix_now();
    let clock = Instant::now();
    let cfg = config::load(&args.config, &args.overrides)?;
    let out: PathBuf = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let resolved = toml::to_string(&cfg).map_err(|e| CliError::run("config echo", e))?;
    std::fs::write(out.join("config.resolved.toml"), resolved).map_err(|e| CliError::io(&out, e))?;
    let summary = match name {
        "simulate" => commands::simulate(&cfg, &out)?,
        "certify" => commands::certify(&cfg, &out)?,
        "optimize" => commands::optimize(&cfg, &out)?,
        _ => commands::energy_report(&cfg, &out)?,
    };
    let meta = json!({
        "subcommand": name,
        "config": args.config.display().to_string(),
        "overrides": args.overrides,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "finished_unix": unix_now(),
        "wall_seconds": clock.elapsed().as_secs_f64(),
    });
    write_meta(&out, &meta)?;
    Ok(summary)
}

fn write_meta(out: &Path, meta: &serde_json::Value) -> Result<(), CliError> {
    let path = out.join("run_meta.json");
    std::fs::write(&path, format!("{meta:#}\n")).map_err(|e| CliError::io(&path, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::Certify(a) => ("certify", a),
        Command::Optimize(a) => ("optimize", a),
        Command::EnergyReport(a) => ("energy-report", a),
    };
    match execute(name, args) {
        Ok(summary) => {
            println!("{summary:#}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
