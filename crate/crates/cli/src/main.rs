use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod exit;
mod run;

use commands::{GridArgs, PointArgs};
use config::RunConfig;
use exit::UsageError;
use run::RunDir;

/// Observation-driven correction of NWP surface winds.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// TOML run configuration (required).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; defaults to a timestamped directory under `paths.runs_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic world: observations plus forecast and reanalysis fields.
    Synth,
    /// Validate and de-duplicate the raw observation table.
    Ingest,
    /// Pair each observation with forecasts at every lead and with reanalysis.
    Matchup,
    /// Build samples and record the chronological train/validation/test split.
    Split,
    /// Train the corrector and save the best checkpoint.
    Train,
    /// Score the checkpoint on the test split and write metric tables and maps.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Correct the forecast at arbitrary coordinates.
    PointInfer {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Issue time, e.g. 2020-02-10T12:00Z.
        #[arg(long)]
        issue_time: String,
        #[arg(long)]
        lead: u32,
        /// `lat,lon` pairs separated by `;`.
        #[arg(long, conflicts_with = "coords_file", allow_hyphen_values = true)]
        coords: Option<String>,
        /// File with one `lat,lon` pair per line.
        #[arg(long)]
        coords_file: Option<PathBuf>,
    },
    /// Correct every node of a regular grid.
    GridInfer {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        issue_time: String,
        #[arg(long)]
        lead: u32,
        /// `lat_min,lat_max,lon_min,lon_max,res`; defaults to the forecast grid.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Target tokens per decoder pass.
        #[arg(long)]
        chunk: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Ingest => "ingest",
            Command::Matchup => "matchup",
            Command::Split => "split",
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::PointInfer { .. } => "point-infer",
            Command::GridInfer { .. } => "grid-infer",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<PathBuf> {
    let path = cli.config.ok_or_else(|| UsageError("--config is required".into()))?;
    let cfg = RunConfig::load(&path, cli.seed)?;
    let mut run = RunDir::create(cli.command.name(), &cfg, cli.out.as_deref())?;
    run.input(&path)?;
    match &cli.command {
        Command::Synth => commands::synth(&cfg, &mut run)?,
        Command::Ingest => commands::ingest(&cfg, &mut run)?,
        Command::Matchup => commands::matchup(&cfg, &mut run)?,
        Command::Split => commands::split(&cfg, &mut run)?,
        Command::Train => commands::train(&cfg, &mut run)?,
        Command::Evaluate { checkpoint } => commands::evaluate(&cfg, checkpoint.as_deref(), &mut run)?,
        Command::PointInfer {
            checkpoint,
            issue_time,
            lead,
            coords,
            coords_file,
        } => {
            let text = match (coords, coords_file) {
                (Some(c), _) => c.clone(),
                (None, Some(f)) => std::fs::read_to_string(f)
                    .with_context(|| format!("reading {}", f.display()))
                    .map_err(|e| UsageError(format!("{e:#}")))?,
                (None, None) => return Err(UsageError("give --coords or --coords-file".into()).into()),
            };
            let args = PointArgs {
                checkpoint: checkpoint.as_deref(),
                issue: issue_time,
                lead: *lead,
                coords: commands::parse_coords(&text)?,
            };
            commands::point_infer(&cfg, args, &mut run)?
        }
        Command::GridInfer {
            checkpoint,
            issue_time,
            lead,
            grid,
            chunk,
        } => {
            let args = GridArgs {
                checkpoint: checkpoint.as_deref(),
                issue: issue_time,
                lead: *lead,
                grid: grid.as_deref().map(commands::parse_grid).transpose()?,
                chunk: *chunk,
            };
            commands::grid_infer(&cfg, args, &mut run)?
        }
    }
    run.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(dir) => {
            println!("run directory: {}", dir.display());
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::classify(&e) as u8)
        }
    }
}
