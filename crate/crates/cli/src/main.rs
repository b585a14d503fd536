//! Batch driver for the damped elastic-wave solver.
//!
//! Three subcommands cover the artifact surface: `run` integrates one config
//! and emits the diagnostics series plus per-suite verdict reports, `sweep`
//! runs a grid of damping strengths and aggregates the verdicts, and
//! `verify-potential` exercises the Newton-potential quadrature suite
//! without any time stepping.
//!
//! Exit codes: 0 when every enabled verdict passes, 1 when a verdict fails,
//! 2 on configuration or IO errors (including JSON parse failures, which
//! report their location).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod output;
mod potsuite;
mod runcmd;
mod sweepcmd;

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Damped elastic-wave runs and verification suites")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one config: series.csv, reports/*.json, manifest.json.
    Run(CommonArgs),
    /// Run a (V0/b, delta, resolution) grid; one subdirectory per cell.
    Sweep(CommonArgs),
    /// Check the Newton-potential quadrature without time stepping.
    VerifyPotential(CommonArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// JSON run config (for `sweep`: the sweep spec).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for lattice fills and sweep cells.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config's working-set cap in MiB.
    #[arg(long)]
    memory_cap_mb: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.cmd {
        Cmd::Run(a) | Cmd::Sweep(a) | Cmd::VerifyPotential(a) => a,
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.cmd {
        Cmd::Run(a) => runcmd::cmd_run(a),
        Cmd::Sweep(a) => sweepcmd::cmd_sweep(a),
        Cmd::VerifyPotential(a) => potsuite::cmd_verify_potential(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
