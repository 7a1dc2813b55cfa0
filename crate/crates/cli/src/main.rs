use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use starsolve::config::Config;
use starsolve::{cmd_convergence, cmd_solve, cmd_svd, configure_threads, CliError, Reporter};

#[derive(Parser)]
#[command(name = "starsolve", version, about = "Spectral Legendre solver for u' = A(t)u")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output file.
    #[arg(long)]
    output: PathBuf,
    /// Only print warnings and errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write the solution (or vᵀu(t) with errors) at the sample times.
    Solve(RunArgs),
    /// Solve and write the singular values of the coefficient matrix X.
    Svd(RunArgs),
    /// Sweep the basis size and write errors against the reference.
    Convergence(RunArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (args, which) = match &cli.command {
        Command::Solve(a) => (a, 0),
        Command::Svd(a) => (a, 1),
        Command::Convergence(a) => (a, 2),
    };
    let rep = Reporter { quiet: args.quiet };
    let cfg = Config::from_path(&args.config)?;
    match which {
        0 => cmd_solve(&cfg, &args.output, &rep),
        1 => cmd_svd(&cfg, &args.output, &rep).map(|_| ()),
        _ => cmd_convergence(&cfg, &args.output, &rep),
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1 like other configuration errors; clap's
    // default of 2 is reserved for non-convergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
