use std::path::PathBuf;
use std::process::ExitCode;

use adiabat::resonance_scenarios::builtin_scenarios;
use adiabat_cli::sweep::SweepKind;
use adiabat_cli::{report, sweep, verify, CliError, Context, RunConfig, SCHEMA};
use clap::{Parser, Subcommand, ValueEnum};

/// Adiabatic-evolution laboratory for shape-resonance Hamiltonians.
#[derive(Parser, Debug)]
#[command(name = "adiabat", version)]
struct Cli {
    /// Run configuration (TOML), or a run's manifest.json to repeat it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores - 1).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the planned jobs without running them.
    #[arg(long, global = true)]
    dry_run: bool,
    /// List scenarios, or the checks / jobs of a subcommand.
    #[arg(long, global = true)]
    list: bool,
    /// Print the annotated configuration schema.
    #[arg(long)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Geometric resolvent identity, commutator decomposition, projector algebra.
    VerifyIdentities,
    /// Run an epsilon or hbar sweep.
    Sweep { kind: Kind },
    /// Rebuild report.md and plots from a run directory.
    Report { run_dir: Option<PathBuf> },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Epsilon,
    Hbar,
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    Context::new(cfg, cli.out.clone(), cli.workers, cli.dry_run || cli.list)
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    if cli.schema {
        print!("{SCHEMA}");
        return Ok(0);
    }
    match &cli.command {
        None => {
            for sc in builtin_scenarios() {
                println!("{:<18} {}", sc.name, sc.summary);
            }
            Ok(0)
        }
        Some(Command::VerifyIdentities) if cli.list => {
            verify::list();
            Ok(0)
        }
        Some(Command::VerifyIdentities) => verify::run(&context(cli)?),
        Some(Command::Sweep { kind }) => {
            let kind = match kind {
                Kind::Epsilon => SweepKind::Epsilon,
                Kind::Hbar => SweepKind::Hbar,
            };
            sweep::run(&context(cli)?, kind)
        }
        Some(Command::Report { run_dir }) => {
            let dir = run_dir.clone().or_else(|| cli.out.clone()).ok_or_else(|| CliError::Config("report needs RUN_DIR or --out".into()))?;
            report::run(&dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("adiabat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
