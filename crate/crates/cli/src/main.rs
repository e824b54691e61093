//! `ghostpin` command-line runner.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::commands::reproduce::{self, Figure};
use crate::commands::Context;
use crate::config::{parse_mode, parse_pm, ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ghostpin", version, about = "Lensless ghost-imaging simulations with a collimated SPDC pump")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Propagation mode: paraxial or exact.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<ghostpin::PropagationMode>,
    /// Phase-matching model: sinc or gaussian.
    #[arg(long, global = true, value_parser = parse_pm)]
    pm: Option<ghostpin::PhaseMatchingModel>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Joint spatial probability at the detector planes (CSV + graymap).
    Jsp,
    /// Ghost pattern on the idler camera, with a peak summary when bimodal.
    Ghost,
    /// Closed-form width, magnification, resolution and mode count.
    Analytic,
    /// Closed-form quantities along sigma_p, d or l_z.
    Sweep,
    /// Pump width minimizing sigma_G or the resolution.
    Optimize,
    /// Rerun a built-in figure parameter set and check it.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3,
    Fig4,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let threads = rayon::current_num_threads();
    let adjust = |s: &mut ghostpin::OpticalSetup| {
        if let Some(m) = cli.mode {
            s.propagation_mode = m;
        }
        if let Some(p) = cli.pm {
            s.pm_model = p;
        }
    };

    if let Command::Reproduce { figure } = cli.command {
        let figure = match figure {
            FigureArg::Fig2 => Figure::Fig2,
            FigureArg::Fig3 => Figure::Fig3,
            FigureArg::Fig4 => Figure::Fig4,
        };
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(figure.as_str()));
        return reproduce::run(figure, &out, threads, &adjust);
    }

    let path = cli.config.clone().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(&path)?;
    adjust(&mut config.setup);
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let out = config.output_dir(cli.out.as_ref());
    let name = format!("{:?}", cli.command).to_lowercase();
    let ctx = Context { config, base, out, threads, command: format!("ghostpin {name}") };
    match cli.command {
        Command::Jsp => commands::cmd_jsp(&ctx),
        Command::Ghost => commands::cmd_ghost(&ctx),
        Command::Analytic => commands::cmd_analytic(&ctx),
        Command::Sweep => commands::cmd_sweep(&ctx),
        Command::Optimize => commands::cmd_optimize(&ctx),
        Command::Reproduce { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ghostpin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
