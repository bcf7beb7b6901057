//! `exproj` command-line front end.
//!
//! Exit status: 0 when every solve converged to an audited-feasible
//! trajectory, 2 when a solve converged but the audit failed, 3 when a solve
//! did not converge, 1 on any error (including usage errors).

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Solve { run } => commands::solve(run),
        Command::Compare { run } => commands::compare_cmd(run),
        Command::Sweep { t_lo, t_hi, run } => commands::sweep(run, *t_lo, *t_hi),
        Command::Check { trajectory, run } => commands::check(run, trajectory),
    };
    match outcome {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
