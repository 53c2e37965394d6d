use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracp::experiments::{
    cmd_monotonicity, cmd_oracle, cmd_solve, cmd_verify, exit_code_for, RunOptions, RunStatus,
};

/// Weighted eigenvalues of the discrete fractional p-Laplacian.
#[derive(Parser, Debug)]
#[command(name = "fracp", version)]
struct Cli {
    /// Debug logging, including per-iteration solver progress.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; defaults to `output.dir`, then a directory under
    /// `$FRACP_OUTPUT_ROOT` (or `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the assembled kernel as `kernel.csv`.
    #[arg(long)]
    dump_kernel: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First and second eigenpairs by the nonlinear solvers.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Cross-check against the exact solver (p = 2 only).
        #[arg(long)]
        oracle: bool,
    },
    /// Exact spectrum for p = 2.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the spectra of m (--config) and m̃ (--tilde-config).
    Monotonicity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tilde_config: PathBuf,
    },
    /// Inequality sweeps, gradient, homogeneity and simplicity checks.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        inject_asymmetry: bool,
    },
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        seed: c.seed,
        out: c.out.clone(),
        dump_kernel: c.dump_kernel,
        ..RunOptions::default()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Solve { common, oracle } => cmd_solve(
            &common.config,
            &RunOptions {
                oracle: *oracle,
                ..options(common)
            },
        ),
        Command::Oracle { common } => cmd_oracle(&common.config, &options(common)),
        Command::Monotonicity {
            common,
            tilde_config,
        } => cmd_monotonicity(&common.config, tilde_config, &options(common)),
        Command::Verify {
            common,
            inject_asymmetry,
        } => cmd_verify(
            &common.config,
            &RunOptions {
                inject_asymmetry: *inject_asymmetry,
                ..options(common)
            },
        ),
    };

    match result {
        Ok(outcome) => {
            match &outcome.status {
                RunStatus::Ok => log::info!("outputs in {}", outcome.run_dir.display()),
                RunStatus::CheckFailed(names) => {
                    eprintln!("failed: {}", names.join(", "));
                }
                RunStatus::NotConverged => {
                    eprintln!(
                        "a solve did not reach the residual tolerance; outputs kept in {}",
                        outcome.run_dir.display()
                    );
                }
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
