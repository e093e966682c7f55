use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reynolds_limit::cli::{run, Command};

/// Compressible thin-film lubrication: Reynolds limit versus thin-channel flow.
#[derive(Parser)]
#[command(name = "reynolds-limit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Target {
    /// key = value config file
    config: PathBuf,
    /// Output directory (overrides `out` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the constitutive assumptions
    Validate(Target),
    /// Stationary Reynolds profile
    Reynolds(Target),
    /// Steady thin-channel solution
    Ns(Target),
    /// Steady solution plus energy and entropy diagnostics
    Diagnostics(Target),
    /// Aspect-ratio sweep against the Reynolds limit
    Sweep(Target),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, t) = match cli.command {
        Cmd::Validate(t) => (Command::Validate, t),
        Cmd::Reynolds(t) => (Command::Reynolds, t),
        Cmd::Ns(t) => (Command::Ns, t),
        Cmd::Diagnostics(t) => (Command::Diagnostics, t),
        Cmd::Sweep(t) => (Command::Sweep, t),
    };
    ExitCode::from(run(cmd, &t.config, t.out) as u8)
}
