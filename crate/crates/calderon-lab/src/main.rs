//! `calderon-lab` — run one configured experiment and exit 0 exactly when
//! every configured property check passes.
//!
//! ```text
//! calderon-lab <recover|stability|lecam|klcheck|truncation>
//!              --config PATH --out DIR [--workers N] [--seed-offset K]
//! ```
//!
//! `CALDERON_LAB_WORKERS` supplies the worker count when `--workers` is
//! absent. Check failures are enumerated on standard error with exit code
//! 1; configuration and IO problems exit with 2.

use std::path::PathBuf;
use std::process::ExitCode;

use calderon_lab::config::{Experiment, ExperimentConfig};

struct Args {
    experiment: Experiment,
    config: PathBuf,
    out: PathBuf,
    workers: usize,
    seed_offset: u64,
}

const USAGE: &str = "usage: calderon-lab <recover|stability|lecam|klcheck|truncation> \
--config PATH --out DIR [--workers N] [--seed-offset K]";

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let sub = argv.next().ok_or(USAGE)?;
    let experiment =
        Experiment::parse(&sub).ok_or_else(|| format!("unknown subcommand `{sub}`\n{USAGE}"))?;
    let mut config = None;
    let mut out = None;
    let mut workers = None;
    let mut seed_offset = 0u64;
    while let Some(flag) = argv.next() {
        let mut value = |name: &str| {
            argv.next()
                .ok_or_else(|| format!("flag {name} needs a value"))
        };
        match flag.as_str() {
            "--config" => config = Some(PathBuf::from(value("--config")?)),
            "--out" => out = Some(PathBuf::from(value("--out")?)),
            "--workers" => {
                workers = Some(
                    value("--workers")?
                        .parse::<usize>()
                        .map_err(|_| "workers must be an integer".to_string())?,
                )
            }
            "--seed-offset" => {
                seed_offset = value("--seed-offset")?
                    .parse::<u64>()
                    .map_err(|_| "seed offset must be an integer".to_string())?
            }
            other => return Err(format!("unknown flag `{other}`\n{USAGE}")),
        }
    }
    let workers = match workers {
        Some(w) => w,
        None => std::env::var("CALDERON_LAB_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1),
    };
    Ok(Args {
        experiment,
        config: config.ok_or("missing --config\n".to_string() + USAGE)?,
        out: out.ok_or("missing --out\n".to_string() + USAGE)?,
        workers: workers.max(1),
        seed_offset,
    })
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.experiment != args.experiment {
        eprintln!(
            "error: config declares experiment {:?} but the subcommand asked for {:?}",
            cfg.experiment, args.experiment
        );
        return ExitCode::from(2);
    }
    match calderon_lab::experiments::run(&cfg, &args.out, args.workers, args.seed_offset) {
        Ok(report) => {
            for check in &report.checks {
                println!(
                    "{} {}: {}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                for failure in report.failures() {
                    eprintln!("check failed: {}: {}", failure.name, failure.detail);
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
