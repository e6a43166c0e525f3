use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use merl_cli::commands::{self, Figure, Options, Streams};
use merl_cli::output::Format;
use merl_cli::CliError;

/// MERL spectra and separability verdicts for multiparticle scenarios.
#[derive(Debug, Parser)]
#[command(name = "merl", version, about)]
struct Cli {
    /// Write data here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Suppress the summary on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Seed for randomized audits.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Absolute split threshold; default 1e-7 * max(1, L0).
    #[arg(long, global = true)]
    tolerance_split: Option<f64>,
    /// Search all control orders and report the one with the most splits.
    #[arg(long, global = true)]
    best_order: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the spectrum and verdict for one scenario file.
    Analyze { scenario: PathBuf },
    /// Recompute the spectrum over a parameter range.
    Sweep {
        scenario: PathBuf,
        /// `mu` (oam_ghz states) or `l_tra`.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Check the variance identities on random scenarios.
    Audit {
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Write the built-in figure tables and scenario files.
    Figures {
        #[arg(value_enum)]
        which: Figure,
        #[arg(default_value = "figures")]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = Options {
        output: cli.output,
        format: cli.format,
        quiet: cli.quiet,
        seed: cli.seed,
        tolerance_split: cli.tolerance_split,
        best_order: cli.best_order,
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr());
    let mut streams = Streams { out: &mut out, err: &mut err };
    match cli.command {
        Command::Analyze { scenario } => commands::analyze(&scenario, &opts, &mut streams),
        Command::Sweep { scenario, param, from, to, steps } => {
            commands::sweep(&scenario, &param, from, to, steps, &opts, &mut streams)
        }
        Command::Audit { trials } => commands::audit(trials, &opts, &mut streams),
        Command::Figures { which, out_dir } => commands::figures(which, &out_dir, &opts, &mut streams),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
