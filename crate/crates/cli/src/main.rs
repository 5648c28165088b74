use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vhi_cli::error::{CliError, EXIT_OTHER};
use vhi_cli::{run, Command, RunOptions};
use vhi_core::stepper::SteppingMode;

#[derive(Parser)]
#[command(name = "vhi", version, about = "History-dependent inequality solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the gate and the time stepper, then write all outputs.
    Solve(Args),
    /// Run the well-posedness gate only.
    Check(Args),
    /// Compare the static solver with the lattice search on one static instance.
    Oracle(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Marching,
    FixedPoint,
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of time steps (overrides `grid.steps`).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    quiet: bool,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("VHI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("VHI_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("VHI_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Oracle(a) => (Command::Oracle, a),
    };
    let opts = RunOptions {
        out: args.out,
        steps: args.steps,
        mode: args.mode.map(|m| match m {
            Mode::Marching => SteppingMode::Marching,
            Mode::FixedPoint => SteppingMode::FixedPoint,
        }),
        quiet: args.quiet,
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_OTHER);
    }
    match run(command, &args.config, &opts) {
        Ok(summary) => {
            if !opts.quiet {
                for line in &summary.lines {
                    println!("{line}");
                }
                println!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
