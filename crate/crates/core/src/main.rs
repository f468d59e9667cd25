//! Command-line front end: scenario-driven runs of the kernel self-test,
//! the solve pipeline, the FD cross-validation and the verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use porous_front::cli::{self, exit_code_for, Scenario};

#[derive(Parser)]
#[command(
    name = "porous-front",
    about = "Two-layer porous-media combustion solver with parametrix kernels, \
             an independent finite-difference oracle and theorem-level checks",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel smoke checks: exactness, drift shift, mass, delta family,
    /// PDE residual.
    KernelSelftest(RunArgs),
    /// March the combustion system over the scenario horizon and dump the
    /// trajectory and norm traces.
    Solve(RunArgs),
    /// Cross-validate the integral solver against the finite-difference
    /// oracle at the final time of one window.
    Compare(RunArgs),
    /// Run the solve pipeline and every requested verification check.
    Verify(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (defaults to the scenario's `output_dir` or `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit per-iteration diagnostics.
    #[arg(long)]
    verbose: bool,
}

fn init_threads() {
    if let Ok(n) = std::env::var("PF_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn run(cmd: &Command) -> porous_front::Result<i32> {
    let args = match cmd {
        Command::KernelSelftest(a) | Command::Solve(a) | Command::Compare(a) | Command::Verify(a) => a,
    };
    let scenario = Scenario::load(&args.scenario)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match cmd {
        Command::KernelSelftest(_) => cli::cmd_kernel_selftest(&scenario, &out_dir, args.verbose),
        Command::Solve(_) => cli::cmd_solve(&scenario, &out_dir, args.verbose),
        Command::Compare(_) => cli::cmd_compare(&scenario, &out_dir, args.verbose),
        Command::Verify(_) => cli::cmd_verify(&scenario, &out_dir, args.verbose),
    }
}

fn main() -> ExitCode {
    init_threads();
    let args = Args::parse();
    match run(&args.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err) as u8)
        }
    }
}
