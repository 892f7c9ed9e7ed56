//! The built-in solver as a stand-alone tool:
//!
//! ```text
//! vnnarena-solve [--mode verify-first|attack-first] NETWORK SPEC TIMEOUT RESULT CE
//! ```
//!
//! Writes the status word to RESULT and, on a violation, the counterexample
//! to CE. The seed is read from `VNNARENA_SEED`.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use vnnarena::netir::load_network;
use vnnarena::solvers::{builtin_solve, Mode, SolveStatus};
use vnnarena::vnnlib::{parse_vnnlib, write_counterexample};

#[derive(Parser)]
#[command(
    version,
    about = "Built-in verifier speaking the harness tool protocol"
)]
struct Args {
    #[arg(long, default_value = "verify-first")]
    mode: Mode,
    #[arg(long, env = "VNNARENA_SEED", default_value_t = 0)]
    seed: u64,
    network: PathBuf,
    spec: PathBuf,
    /// Seconds.
    timeout: f64,
    result: PathBuf,
    ce: PathBuf,
}

fn solve(args: &Args) -> Result<SolveStatus> {
    let net = load_network(&args.network).with_context(|| args.network.display().to_string())?;
    let text = fs::read_to_string(&args.spec).with_context(|| args.spec.display().to_string())?;
    let p = parse_vnnlib(&text).with_context(|| args.spec.display().to_string())?;
    anyhow::ensure!(
        args.timeout >= 0.0 && args.timeout.is_finite(),
        "invalid timeout {}",
        args.timeout
    );
    let outcome = builtin_solve(
        args.mode,
        &net,
        &p,
        Duration::from_secs_f64(args.timeout),
        args.seed,
    )?;
    Ok(outcome.status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let (word, code) = match solve(&args) {
        Ok(status) => {
            if let SolveStatus::Violated(a) = &status {
                if let Err(e) = fs::write(&args.ce, write_counterexample(a)) {
                    eprintln!("error: {}: {e}", args.ce.display());
                    return ExitCode::from(2);
                }
            }
            (status.result_status().to_string(), ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ("error".to_string(), ExitCode::from(2))
        }
    };
    if let Err(e) = fs::write(&args.result, format!("{word}\n")) {
        eprintln!("error: {}: {e}", args.result.display());
        return ExitCode::from(2);
    }
    code
}
