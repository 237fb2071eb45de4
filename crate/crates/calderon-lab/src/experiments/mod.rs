//! The experiment commands behind the CLI subcommands. Each takes a
//! resolved configuration, writes its result files under an output
//! directory and returns the property-check report that decides the exit
//! code.

use std::fmt;
use std::path::Path;

use calderon_core::conductivity::{ConductivityField, GridField};
use calderon_core::fem::analytic_dtn_concentric;
use calderon_core::spectral::OperatorMatrix;

use crate::config::{ExperimentConfig, TruthSpec};
use crate::digest::digest_hex;

pub mod klcheck;
pub mod lecam;
pub mod recover;
pub mod stability;
pub mod truncation;

/// One named pass/fail verdict.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// All verdicts of one run.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckItem>,
}

impl CheckReport {
    pub fn push(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckItem {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug)]
pub enum RunError {
    Io(std::io::Error),
    Invalid(String),
    Numeric(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            RunError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Digest of the resolved configuration, stamped into every output file.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    digest_hex(cfg.canonical_json().as_bytes())
}

/// Noiseless spectral coefficient matrix of the configured truth on a
/// window of `modes` flat indices (at heteroscedasticity index `r`).
pub fn truth_matrix(cfg: &ExperimentConfig, modes: usize, r: f64) -> OperatorMatrix {
    match cfg.truth {
        TruthSpec::One => OperatorMatrix::zeros(modes, modes, r),
        TruthSpec::Concentric => {
            let half = modes.div_ceil(2);
            let diag: Vec<f64> = (1..=half)
                .map(|n| analytic_dtn_concentric(cfg.truth_kappa, cfg.truth_rho, n) - n as f64)
                .collect();
            OperatorMatrix::from_mode_diagonal(&diag, 0.0)
                .resized(modes, modes)
                .rescale_index(r)
        }
    }
}

/// Grid sampling of the configured truth for sup-norm errors.
pub fn truth_field(cfg: &ExperimentConfig) -> ConductivityField {
    match cfg.truth {
        TruthSpec::One => ConductivityField::ones(cfg.grid_n),
        TruthSpec::Concentric => {
            let kappa = cfg.truth_kappa;
            let rho = cfg.truth_rho;
            ConductivityField {
                grid: GridField::from_fn(cfg.grid_n, |x, y| {
                    if x * x + y * y < rho * rho {
                        kappa
                    } else {
                        1.0
                    }
                }),
                m: kappa.min(1.0),
                support_radius: rho,
            }
        }
    }
}

/// Dispatch a configured experiment. The fully resolved configuration is
/// echoed to `config.json` next to the result files, and the check report
/// itself lands in `checks.json`.
pub fn run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    workers: usize,
    seed_offset: u64,
) -> Result<CheckReport, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let digest = config_digest(cfg);
    crate::io::write_json_report(&out_dir.join("config.json"), cfg, &digest, &serde_json::json!({}))?;
    let report = match cfg.experiment {
        crate::config::Experiment::Recover => recover::run(cfg, out_dir, workers, seed_offset),
        crate::config::Experiment::Stability => stability::run(cfg, out_dir),
        crate::config::Experiment::Lecam => lecam::run(cfg, out_dir, workers),
        crate::config::Experiment::Klcheck => klcheck::run(cfg, out_dir, workers),
        crate::config::Experiment::Truncation => truncation::run(cfg, out_dir, seed_offset),
    }?;
    crate::io::write_json_report(&out_dir.join("checks.json"), cfg, &digest, &report)?;
    Ok(report)
}
