//! Truncation-estimator study: realised squared loss of the spectral cutoff
//! estimator at the plug-in level `J* = ⌊η/ε⌋` against halving and doubling
//! it, replicated over seeds.

use std::path::Path;

use calderon_core::inference::{truncation_estimator, truncation_level};
use calderon_core::measurement::synth_spectral;

use super::{config_digest, truth_matrix, CheckReport, RunError};
use crate::config::ExperimentConfig;
use crate::io::{fmt_f64, write_csv};

pub fn run(cfg: &ExperimentConfig, out_dir: &Path, seed_offset: u64) -> Result<CheckReport, RunError> {
    if cfg.seeds.is_empty() {
        return Err(RunError::Invalid("seeds must be non-empty".into()));
    }
    let digest = config_digest(cfg);
    let eps = cfg.trunc_eps;
    let jstar = truncation_level(eps, cfg.trunc_alpha);
    if jstar < 2 || 2 * jstar > cfg.trunc_master {
        return Err(RunError::Invalid(format!(
            "plug-in level J* = {jstar} does not fit the master window {}",
            cfg.trunc_master
        )));
    }
    let truth = truth_matrix(cfg, cfg.trunc_master, cfg.noise_r);

    let mut rows = Vec::new();
    let mut oracle_wins = 0usize;
    for &seed in &cfg.seeds {
        let seed = seed + seed_offset;
        let data = synth_spectral(&truth, eps, seed);
        let loss = |j: usize| {
            let est = truncation_estimator(&data, j);
            let d = est.sub(&truth).hs_norm();
            d * d
        };
        let at_half = loss(jstar / 2);
        let at_star = loss(jstar);
        let at_double = loss(2 * jstar);
        if at_star <= at_half && at_star <= at_double {
            oracle_wins += 1;
        }
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            seed,
            jstar / 2,
            fmt_f64(at_half),
            jstar,
            fmt_f64(at_star),
            2 * jstar,
            fmt_f64(at_double)
        ));
    }
    write_csv(
        &out_dir.join("truncation.csv"),
        &digest,
        "seed,j_half,loss_half,j_star,loss_star,j_double,loss_double",
        &rows,
    )?;

    let mut report = CheckReport::default();
    report.push(
        "oracle_level_wins",
        oracle_wins == cfg.seeds.len(),
        format!(
            "J* = {jstar} minimal in {oracle_wins}/{} seeds at eps = {}",
            cfg.seeds.len(),
            fmt_f64(eps)
        ),
    );
    Ok(report)
}
