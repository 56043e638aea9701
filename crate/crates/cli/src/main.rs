//! `levikernel run --config <path> --suite <sel> --out <dir> [--refine N] [--seed S]`
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails,
//! 2 for an invalid config, suite selector or output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levikernel_core::verify::{self, Suite};

/// Environment variable holding the size of the worker pool.
const WORKERS_VAR: &str = "LEVIKERNEL_WORKERS";

#[derive(Parser)]
#[command(name = "levikernel", version, about = "Heat kernel construction and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write report.json, CSV tables and plot data.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated suites: scale, model, symkernel, parametrix, simulate or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Multiply every grid resolution by N.
        #[arg(long, default_value_t = 1)]
        refine: u32,
        /// Override the seeds of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the check ids of the selected suites with their anchors.
    Checks {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn workers() -> Result<Option<usize>, String> {
    match std::env::var(WORKERS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{WORKERS_VAR} must be a positive integer, got `{v}`")),
        },
    }
}

fn usage_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn run(config: PathBuf, suite: String, out: PathBuf, refine: u32, seed: Option<u64>) -> ExitCode {
    let workers = match workers() {
        Ok(w) => w,
        Err(e) => return usage_error(e),
    };
    let report = match verify::run(&config, &suite, &out, refine, seed, workers) {
        Ok(r) => r,
        Err(e) => return usage_error(e),
    };
    let mut failed = Vec::new();
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("{status} {:<8} {:<38} {:>12.4e} {:>8.2}s", c.profile, c.id, c.value, c.wall_time);
        if !c.pass {
            failed.push(c);
        }
    }
    println!(
        "{}/{} checks passed in {:.1}s; report at {}",
        report.checks.len() - failed.len(),
        report.checks.len(),
        report.wall_time,
        out.join("report.json").display()
    );
    if failed.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("failed checks:");
    for c in failed {
        match &c.error {
            Some(e) => eprintln!("  {} [{}]: {} ({e})", c.id, c.profile, c.anchor),
            None => eprintln!("  {} [{}]: {}", c.id, c.profile, c.anchor),
        }
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, suite, out, refine, seed } => run(config, suite, out, refine, seed),
        Command::Checks { suite } => {
            let suites = match Suite::parse_selector(&suite) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let config = verify::Config::default();
            for s in suites {
                for p in &config.profiles {
                    for (id, anchor) in verify::suite_manifest(s, p) {
                        println!("{:<8} {id:<38} {anchor}", p.name);
                    }
                }
            }
            ExitCode::SUCCESS
        }
    }
}
