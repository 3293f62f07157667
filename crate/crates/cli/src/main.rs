//! `igaspec`: command-line driver for the isogeometric spectral experiments.
//!
//! Exit status: 0 on success, 1 when `--check` fails, 2 for usage and
//! validation errors, 3 for numerical and i/o failures.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CmdResult;
use crate::config::{CommonArgs, Settings};

#[derive(Parser)]
#[command(
    name = "igaspec",
    version,
    about = "Spectral experiments for isogeometric discretizations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and solve one discrete eigenproblem.
    Spectrum(SpectrumArgs),
    /// Tabulate the symbol, its distribution function and rearrangement.
    Symbol(SymbolArgs),
    /// Weyl counting errors over an n ladder.
    Weyl(PlainArgs),
    /// Compare the spectra of two reparametrizations index by index.
    Order(OrderArgs),
    /// Count frequencies per cell of a window.
    Pack(PackArgs),
    /// Sampling errors against the rearranged symbol over an n ladder.
    Estimate(PlainArgs),
}

#[derive(Args)]
struct PlainArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write mass.txt and stiffness.txt as `i j value` triplets.
    #[arg(long)]
    dump_matrices: bool,
}

#[derive(Args)]
struct SymbolArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Points per axis of the symbol grid.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Two maps such as `exp:2,exp:1` (family:a); gamma is shared.
    #[arg(long)]
    pair: Option<String>,
}

#[derive(Args)]
struct PackArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `auto-concave` or an explicit frequency window `lo,hi`.
    #[arg(long)]
    window: Option<String>,
    /// Number of cells.
    #[arg(long)]
    r: Option<usize>,
}

fn flag_bool(v: bool) -> Option<String> {
    v.then(|| "true".to_string())
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Spectrum(args) => {
            let s = Settings::load(&args.common, &[("dump_matrices", flag_bool(args.dump_matrices))])?;
            let dump = match s.raw("dump_matrices") {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => {
                    return Err(config::ConfigError(format!(
                        "field `dump_matrices` must be true or false, got `{other}`"
                    ))
                    .into())
                }
            };
            commands::spectrum(&s, dump)
        }
        Command::Symbol(args) => {
            let s = Settings::load(&args.common, &[("grid", args.grid.map(|g| g.to_string()))])?;
            let grid = s.optional("grid")?;
            commands::symbol(&s, grid)
        }
        Command::Weyl(args) => commands::weyl(&Settings::load(&args.common, &[])?),
        Command::Order(args) => {
            let s = Settings::load(&args.common, &[("pair", args.pair)])?;
            let pair = s.raw("pair").map(str::to_string);
            commands::order(&s, pair.as_deref())
        }
        Command::Pack(args) => {
            let s = Settings::load(
                &args.common,
                &[("window", args.window), ("r", args.r.map(|r| r.to_string()))],
            )?;
            let window = s.raw("window").map(str::to_string);
            let r = s.optional("r")?;
            commands::pack(&s, window.as_deref(), r)
        }
        Command::Estimate(args) => commands::estimate(&Settings::load(&args.common, &[])?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.check_enabled && !outcome.passed {
                eprintln!("check failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
