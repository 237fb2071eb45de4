//! Divergence checks: the closed-form Kullback-Leibler identity against a
//! Monte Carlo estimate, and the two-point minimax risk bound table.

use std::path::Path;

use calderon_core::measurement::{kl_divergence, synth_spectral, two_point_risk_bound};
use calderon_core::spectral::OperatorMatrix;

use super::{config_digest, truth_matrix, CheckReport, RunError};
use crate::config::ExperimentConfig;
use crate::io::{fmt_f64, write_csv};
use crate::workers::{chunk_ranges, parallel_map};

/// Log density ratio of the spectral model evaluated directly.
fn log_ratio(y: &[f64], l1: &OperatorMatrix, l0: &OperatorMatrix, eps: f64) -> f64 {
    let inv = 1.0 / (eps * eps);
    let mut acc = 0.0;
    for (i, &yv) in y.iter().enumerate() {
        let a = l1.entries()[i];
        let b = l0.entries()[i];
        acc += inv * (yv * (a - b) - 0.5 * (a * a - b * b));
    }
    acc
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<CheckReport, RunError> {
    if cfg.kl_eps_list.is_empty() || cfg.mu_list.is_empty() {
        return Err(RunError::Invalid("kl_eps_list and mu_list must be non-empty".into()));
    }
    let digest = config_digest(cfg);
    let mut report = CheckReport::default();

    let jk = cfg.kl_window;
    let l1 = truth_matrix(cfg, jk, cfg.noise_r);
    let l0 = OperatorMatrix::zeros(jk, jk, cfg.noise_r);

    let mut rows = Vec::new();
    for (ei, &eps) in cfg.kl_eps_list.iter().enumerate() {
        let closed = kl_divergence(&l1, &l0, eps).map_err(|e| RunError::Numeric(e.to_string()))?;
        let reps = cfg.kl_replicates;
        let chunks = chunk_ranges(reps, workers.max(1) * 4);
        let partials: Vec<(f64, f64)> = parallel_map(&chunks, workers, |range| {
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for rep in range.clone() {
                let seed = 900_000_000 + (ei * reps + rep) as u64;
                let data = synth_spectral(&l1, eps, seed);
                let lr = log_ratio(&data.y, &l1, &l0, eps);
                sum += lr;
                sum2 += lr * lr;
            }
            (sum, sum2)
        });
        let (sum, sum2) = partials
            .iter()
            .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        let mean = sum / reps as f64;
        let var = sum2 / reps as f64 - mean * mean;
        let se = (var / reps as f64).sqrt();
        let z = (mean - closed) / se;
        rows.push(format!(
            "{},{},{},{},{}",
            fmt_f64(eps),
            fmt_f64(closed),
            fmt_f64(mean),
            fmt_f64(se),
            fmt_f64(z)
        ));
        report.push(
            format!("kl_identity_eps_{}", fmt_f64(eps)),
            z.abs() <= 3.0,
            format!("closed {closed:.6} vs MC {mean:.6} (z = {z:.2})"),
        );
    }
    write_csv(
        &out_dir.join("klcheck.csv"),
        &digest,
        "eps,closed_form,mc_estimate,mc_se,z",
        &rows,
    )?;

    // Two-point bound table.
    let mut tp_rows = Vec::new();
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for &mu in &cfg.mu_list {
        let bound = two_point_risk_bound(mu);
        tp_rows.push(format!("{},{}", fmt_f64(mu), fmt_f64(bound)));
        if bound > prev + 1e-15 {
            monotone = false;
        }
        prev = bound;
    }
    write_csv(&out_dir.join("two_point.csv"), &digest, "mu,risk_bound", &tp_rows)?;

    report.push(
        "two_point_at_zero",
        (two_point_risk_bound(0.0) - 1.0 / 3.0).abs() < 1e-15,
        "bound(0) = 1/3 exactly",
    );
    report.push(
        "two_point_monotone",
        monotone,
        "bound nonincreasing over the mu grid",
    );
    let all_above_quarter = cfg
        .mu_list
        .iter()
        .filter(|&&mu| mu <= 0.01)
        .all(|&mu| two_point_risk_bound(mu) > 0.25);
    report.push(
        "two_point_above_quarter",
        all_above_quarter,
        "bound(mu) > 1/4 for all configured mu <= 0.01",
    );
    report.push(
        "two_point_root_bracketed",
        two_point_risk_bound(0.01) > 0.25 && two_point_risk_bound(0.05) < 0.25,
        "bound crosses 1/4 inside (0.01, 0.05)",
    );
    Ok(report)
}
