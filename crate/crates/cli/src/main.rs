use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmt_cli::commands::{self, CliError};
use mmt_cli::config::ScenarioConfig;

/// Minimum-time multi-mode transfers between Earth-Moon periodic orbits.
#[derive(Debug, Parser)]
#[command(name = "mmt", version)]
struct Cli {
    /// Worker threads for error estimation (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check Jacobi constants and one-period closure of the target orbits.
    OrbitsVerify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Closure tolerance per component.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Solve the configured transfer and write its report and trajectories.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Collocation error tolerance recorded in the report.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        /// Transcribe and report problem dimensions without solving.
        #[arg(long)]
        dry_run: bool,
    },
    /// Continuation over the configured list of propellant bounds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-propagate every converged solution of a report with its stored controls.
    VerifySolution {
        report: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    match cli.command {
        Command::OrbitsVerify { config, tolerance } => {
            let cfg = config.map(|p| ScenarioConfig::load(&p)).transpose()?;
            commands::orbits_verify(cfg.as_ref(), tolerance)
        }
        Command::Solve { config, out, tolerance, dry_run } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = commands::out_dir(out.as_deref(), Some(&cfg));
            commands::solve(&cfg, &out, tolerance, dry_run)
        }
        Command::Sweep { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let out = commands::out_dir(out.as_deref(), Some(&cfg));
            commands::sweep(&cfg, &out)
        }
        Command::VerifySolution { report, tolerance } => commands::verify_solution(&report, tolerance),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
