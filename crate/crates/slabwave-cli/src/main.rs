mod commands;
mod config;
mod error;
mod output;
mod verify;

use clap::{Args, Parser, Subcommand};
use error::CliError;
use output::OutDir;
use std::path::PathBuf;
use std::process::ExitCode;

/// Guided modes, coupling, spectra and pair evolution for moving dielectric slabs.
#[derive(Parser)]
#[command(name = "slabwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dotted-key override, e.g. `mode.kx=2.0` or `stack.1.beta=0.9`.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Material matrices, definiteness and thresholds per slab.
    Material,
    /// Lab-frame dispersion sweep of a single slab.
    Dispersion,
    /// Coupling constants and the hybrid-mode trajectory of two slabs.
    Hybridize,
    /// Discretized spectrum with Krein-basis residuals.
    Spectrum,
    /// Pair-creation evolution on the |n,n⟩ chain.
    Evolve,
    /// Runs every invariant check and writes a report.
    Verify,
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = config::load(cli.common.config.as_deref(), &cli.common.overrides)?;
    let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut out = OutDir::new(&dir);
    let summary = match cli.command {
        Command::Material => commands::material(&cfg, &mut out),
        Command::Dispersion => commands::dispersion(&cfg, &mut out),
        Command::Hybridize => commands::hybridize_cmd(&cfg, &mut out),
        Command::Spectrum => commands::spectrum(&cfg, &mut out),
        Command::Evolve => commands::evolve(&cfg, &mut out),
        Command::Verify => verify::verify(&cfg, &mut out),
    }?;
    let mut s = summary;
    for p in &out.written {
        s.push_str(&format!("wrote {}\n", p.display()));
    }
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
