//! `frontspeed`: directional front speeds in periodic media from JSON configs.
//!
//! Exit codes: 0 success, 1 output error, 2 config error, 3 numerical failure.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::{CliError, Outcome};
use report::{sha256_hex, OutputDir, RunManifest};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frontspeed", version, about = "Front speeds in spatially periodic reaction-diffusion media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Linearized speeds c_lin(n) from the periodic eigenproblem.
    Eigen,
    /// Direct simulation and front tracking in one direction.
    Speed,
    /// Speed curve n -> c(n) over sampled directions.
    Scan,
    /// Ignition-approximation convergence table.
    Approx,
    /// Uniform spreading and supersolution checks.
    Validate,
    /// Pulsating wave profile reconstruction.
    Profile,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Speed => "speed",
            Command::Scan => "scan",
            Command::Approx => "approx",
            Command::Validate => "validate",
            Command::Profile => "profile",
        }
    }
}

fn execute<C, F>(name: &str, raw: &[u8], out: &Path, run: F) -> Result<Outcome, CliError>
where
    C: DeserializeOwned + Serialize,
    F: FnOnce(&C, &mut OutputDir) -> Result<Outcome, CliError>,
{
    let cfg: C = serde_json::from_slice(raw).map_err(|e| CliError::Config(e.to_string()))?;
    let started = chrono::Utc::now().to_rfc3339();
    let mut dir = OutputDir::create(out)?;
    let mut outcome = run(&cfg, &mut dir)?;
    outcome.inputs.insert(0, ("config".into(), sha256_hex(raw)));
    let files = dir.files().to_vec();
    let manifest = RunManifest {
        tool: "frontspeed",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        config: &cfg,
        input_hashes: outcome.inputs.clone(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        outputs: &files,
    };
    dir.finish(&manifest)?;
    Ok(outcome)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let raw = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let name = cli.command.name();
    match cli.command {
        Command::Eigen => execute(name, &raw, &cli.out, commands::eigen),
        Command::Speed => execute(name, &raw, &cli.out, commands::speed),
        Command::Scan => execute(name, &raw, &cli.out, commands::scan),
        Command::Approx => execute(name, &raw, &cli.out, commands::approx),
        Command::Validate => execute(name, &raw, &cli.out, commands::validate),
        Command::Profile => execute(name, &raw, &cli.out, commands::profile),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}: {}", cli.command.name(), outcome.summary);
            match outcome.failure {
                None => ExitCode::SUCCESS,
                Some(f) => {
                    eprintln!("numerical failure: {f}");
                    ExitCode::from(3)
                }
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
