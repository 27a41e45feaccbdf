//! `qrp`: solve, verify and compare corridor equilibria from JSON instance files.
//!
//! Exit status is 0 on success, 1 on a domain failure (invalid corridor,
//! violated slope condition, failed check or ordering) and 2 on I/O or parse
//! errors. Errors are printed as `error[Code]: message`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrp_core::StateKind;

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "qrp",
    version,
    about = "Corridor equilibria under pricing and metering policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the corridor and the slope condition of an instance.
    Validate { config: PathBuf },
    /// Solve one state and write curves.csv, rho.csv and summary.json.
    Solve {
        config: PathBuf,
        #[arg(value_parser = parse_state)]
        state: StateKind,
        /// 1-based indices, comma separated; required by pbp, prm and prp.
        #[arg(long)]
        subset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit output even when the slope condition fails (diagnostics only).
        #[arg(long)]
        force: bool,
        /// Uniform fill step of the time column (default: oracle.dt).
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run the residual checks, plus the LP oracle for `dso`, and write verify.txt.
    Verify {
        config: PathBuf,
        #[arg(value_parser = parse_state)]
        state: StateKind,
        #[arg(long)]
        subset: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        padding: Option<f64>,
        /// Bound on the complementarity and conservation residuals.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Scale mainline queues and bottleneck prices before checking.
        #[arg(long, value_name = "FACTOR")]
        perturb: Option<f64>,
        /// Write the discretized LP as MatrixMarket triplets.
        #[arg(long, value_name = "PATH")]
        dump_lp: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Compare policies, e.g. `dso due rm rp pbp:2 prp:1,2 prp:` or `all`.
    Compare {
        config: PathBuf,
        policies: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check random instances end to end.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: u64,
    },
}

fn parse_state(s: &str) -> Result<StateKind, String> {
    StateKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = StateKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown state `{s}` (expected one of {})", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => commands::validate(&config),
        Command::Solve {
            config,
            state,
            subset,
            out,
            force,
            dt,
        } => commands::solve(&commands::SolveArgs {
            config,
            state,
            subset,
            out,
            force,
            dt,
        }),
        Command::Verify {
            config,
            state,
            subset,
            dt,
            padding,
            tol,
            perturb,
            dump_lp,
            out,
            force,
        } => commands::verify(&commands::VerifyArgs {
            config,
            state,
            subset,
            dt,
            padding,
            tol,
            perturb,
            dump_lp,
            out,
            force,
        }),
        Command::Compare {
            config,
            policies,
            out,
        } => commands::compare(&config, &policies, out.as_deref()),
        Command::Fuzz { seed, count } => commands::fuzz(seed, count),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e);
            ExitCode::from(e.exit_status())
        }
    }
}

impl Failure {
    fn exit_status(&self) -> u8 {
        match self {
            Failure::Io(_) | Failure::Parse(_) => 2,
            _ => 1,
        }
    }
}
