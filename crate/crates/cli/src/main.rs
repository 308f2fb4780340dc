use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qclimit_cli::commands::{run, Command, RunOptions};
use qclimit_cli::config::{load, Overrides};
use qclimit_cli::CliError;

/// Quasi-classical limit experiments for Nelson and Pauli-Fierz models.
#[derive(Parser)]
#[command(name = "qclimit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (TOML). Without it the `coherent-nelson` preset with seed 7 is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat assumption-audit failures as fatal (exit 3).
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Audit dispersion, coupling, external potential and state energies.
    CheckAssumptions,
    /// Lorentz-space inequality corpus and the 1/|k| weak-norm row.
    LorentzSuite,
    /// Export effective potentials for every sweep point and the limit.
    Potentials,
    /// Lowest eigenvalues of the effective particle operators.
    Spectrum,
    /// Convergence harness over the epsilon sweep.
    Converge,
    /// Cutoff-schedule experiment.
    UvSweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Cmd::CheckAssumptions => Command::CheckAssumptions,
        Cmd::LorentzSuite => Command::LorentzSuite,
        Cmd::Potentials => Command::Potentials,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Converge => Command::Converge,
        Cmd::UvSweep => Command::UvSweep,
    };
    let result = (|| -> Result<Vec<String>, CliError> {
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::config(format!("--threads: {e}")))?;
        }
        let cfg = load(cli.config.as_deref(), &Overrides { out: cli.out.clone(), seed: cli.seed })?;
        run(cmd, &cfg, RunOptions { strict: cli.strict })
    })();
    match result {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class as u8)
        }
    }
}
