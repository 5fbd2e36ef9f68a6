mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Failure;
use crate::config::RunConfig;
use crate::output::{Meta, Writer};

/// Batch workbench for boundary vortices of the boundary-reaction problem.
#[derive(Parser, Debug)]
#[command(name = "vortex", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Renormalized-energy landscape and its local minima.
    Landscape,
    /// One boundary solve at fixed ε.
    Solve,
    /// Continuation along ε.
    Branch,
    /// Run verification suites.
    Verify,
    /// Layer profile on the line.
    Layer,
    /// The layer energy constant C_f.
    Cf,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Landscape => "landscape",
            Command::Solve => "solve",
            Command::Branch => "branch",
            Command::Verify => "verify",
            Command::Layer => "layer",
            Command::Cf => "cf",
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.into()))?;
    }
    let dir = commands::output_dir(cli.out.as_deref(), &cfg);
    let mut out = Writer::new(dir, Meta::new(cli.command.name(), cfg.hash())).map_err(Failure::Config)?;
    log::debug!("config hash {}", out.meta().config_hash);
    match cli.command {
        Command::Landscape => commands::landscape(&cfg, &mut out),
        Command::Solve => commands::solve(&cfg, &mut out),
        Command::Branch => commands::branch(&cfg, &mut out),
        Command::Verify => verify::run(&cfg, &mut out),
        Command::Layer => commands::layer(&cfg, &mut out),
        Command::Cf => commands::cf(&cfg, &mut out),
    }?;
    Ok(out.written().to_vec())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
