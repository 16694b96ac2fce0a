use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use minimax_adapt_cli::commands::{cmd_dpcheck, cmd_example, cmd_simulate, cmd_synth, cmd_verify, Options};
use minimax_adapt_cli::{CliError, EXIT_INPUT, EXIT_OK};

type Runner = fn(&Options, &mut dyn std::io::Write) -> Result<u8, CliError>;

/// Minimax adaptive control: synthesis, verification and simulation.
#[derive(Parser)]
#[command(name = "minimax-adapt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Certificate JSON file.
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the seeds in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the simulation horizon.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a certificate at gamma, or bisect over gamma_range.
    Synth(Flags),
    /// Check a certificate's inequalities and sampled Bellman decrease.
    Verify(Flags),
    /// Simulate the adaptive controller.
    Simulate(Flags),
    /// Bellman sample check and scalar value iteration.
    Dpcheck(Flags),
    /// Reproduce the double-integrator example end to end.
    ExampleDoubleIntegrator(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    let (run, flags): (Runner, Flags) = match cli.command {
        Command::Synth(f) => (cmd_synth, f),
        Command::Verify(f) => (cmd_verify, f),
        Command::Simulate(f) => (cmd_simulate, f),
        Command::Dpcheck(f) => (cmd_dpcheck, f),
        Command::ExampleDoubleIntegrator(f) => (cmd_example, f),
    };
    let opts = Options {
        config: flags.config,
        cert: flags.cert,
        out_dir: flags.out_dir,
        seed: flags.seed,
        horizon: flags.horizon,
    };
    let mut out = std::io::stdout().lock();
    match run(&opts, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
