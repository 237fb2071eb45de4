//! Behavioural tests of the pCN chain: invariance of the prior when the
//! data term is off, cache coherence, bias-variance behaviour of the
//! truncation estimator and a small end-to-end recovery smoke test.

use calderon_core::conductivity::{make_cutoff, ConductivityField, GridField, LinkFunction};
use calderon_core::fem::analytic_dtn_concentric;
use calderon_core::inference::{
    run_chain, truncation_estimator, truncation_level, ChainConfig, LikelihoodContext,
};
use calderon_core::measurement::synth_spectral;
use calderon_core::mesh::build_mesh;
use calderon_core::prior::{MaternSampler, MaternSpec, RescaledPrior};
use calderon_core::spectral::OperatorMatrix;

fn concentric_matrix(modes: usize) -> OperatorMatrix {
    let diag: Vec<f64> = (1..=modes)
        .map(|n| analytic_dtn_concentric(2.0, 0.5, n) - n as f64)
        .collect();
    OperatorMatrix::from_mode_diagonal(&diag, 0.0)
}

fn concentric_truth(kappa: f64, rho: f64, grid_n: usize) -> ConductivityField {
    ConductivityField {
        grid: GridField::from_fn(grid_n, |x, y| {
            if x * x + y * y < rho * rho {
                kappa
            } else {
                1.0
            }
        }),
        m: 1.0,
        support_radius: rho,
    }
}

#[test]
fn prior_only_chain_preserves_prior_variance() {
    // With the likelihood disabled every proposal is accepted and the pCN
    // kernel leaves the rescaled prior invariant; the chain marginal at the
    // center must reproduce the prior variance within ten percent.
    let grid_n = 17;
    let eps_prior = 0.5;
    let spec = MaternSpec {
        n_modes: 8,
        ..Default::default()
    };
    let sampler = MaternSampler::new(spec, grid_n).unwrap();
    let zeta = make_cutoff(0.5, 0.75, grid_n).unwrap();
    let prior = RescaledPrior::new(sampler, zeta, eps_prior);

    // Direct Monte Carlo over independent draws.
    let draws = 4000u64;
    let mut mc = 0.0;
    for seed in 0..draws {
        let v = prior.draw(seed, 0).bilinear(0.0, 0.0);
        mc += v * v;
    }
    let mc_var = mc / draws as f64;

    // Chain marginal over 1e4 steps; β large so the walk decorrelates fast.
    let mesh = build_mesh(0.25).unwrap();
    let data = synth_spectral(&OperatorMatrix::zeros(2, 2, 0.0), 1.0, 0);
    let ctx = LikelihoodContext::new(data, LinkFunction::default(), mesh).disabled();
    let cfg = ChainConfig {
        beta: 0.7,
        n_iter: 10_000,
        burn_in: 500,
        seed: 17,
        cache_check_every: 0,
    };
    let run = run_chain(&ctx, &prior, &cfg, None).unwrap();
    assert_eq!(run.summary.acceptance_rate, 1.0);

    let mut chain_var = 0.0;
    let mut count = 0.0;
    // Recompute the center marginal from the trace by re-running the
    // recursion? The mean field is stored, so use the second-moment trick:
    // run a second chain accumulating squares through the trace hook
    // instead. Simpler: correlate sup trace? No -- draw the states again.
    // The chain is deterministic, so replay it cheaply.
    let mut state = calderon_core::inference::ChainState::initial(&ctx, grid_n);
    for step in 0..cfg.n_iter {
        let (next, _) = calderon_core::inference::pcn_step(&state, cfg.beta, &ctx, &prior, cfg.seed)
            .unwrap();
        state = next;
        if step >= cfg.burn_in {
            let v = state.theta.bilinear(0.0, 0.0);
            chain_var += v * v;
            count += 1.0;
        }
    }
    chain_var /= count;
    let rel = (chain_var - mc_var).abs() / mc_var;
    assert!(
        rel < 0.10,
        "chain variance {chain_var} vs MC {mc_var} (rel {rel:.3})"
    );
}

#[test]
fn oracle_truncation_level_beats_neighbours() {
    // Bias-variance sweep: the plug-in level J* minimises the realised
    // squared loss against halving or doubling it, for every seed tried.
    let eps = 0.0113;
    let jstar = truncation_level(eps, 3.0);
    assert_eq!(jstar, 6);
    let big = concentric_matrix(16).resized(24, 24);
    for seed in 1..=3u64 {
        let data = synth_spectral(&big, eps, seed);
        let loss = |j: usize| {
            let est = truncation_estimator(&data, j);
            let d = est.sub(&big).hs_norm();
            d * d
        };
        let at_half = loss(jstar / 2);
        let at_star = loss(jstar);
        let at_double = loss(2 * jstar);
        assert!(
            at_star <= at_half && at_star <= at_double,
            "seed {seed}: J* loss {at_star} vs J/2 {at_half}, 2J {at_double}"
        );
    }
}

#[test]
fn chain_cache_coherence_is_verified_in_flight() {
    // The run recomputes the cached likelihood every few steps; a clean run
    // must simply pass, exercising the coherence invariant.
    let grid_n = 17;
    let mesh = build_mesh(0.2).unwrap();
    let lambda = concentric_matrix(2).resized(4, 4);
    let data = synth_spectral(&lambda, 0.05, 2);
    let ctx = LikelihoodContext::new(data, LinkFunction::default(), mesh);
    let spec = MaternSpec {
        n_modes: 8,
        ..Default::default()
    };
    let sampler = MaternSampler::new(spec, grid_n).unwrap();
    let zeta = make_cutoff(0.5, 0.75, grid_n).unwrap();
    let prior = RescaledPrior::new(sampler, zeta, 0.05);
    let cfg = ChainConfig {
        beta: 0.3,
        n_iter: 300,
        burn_in: 100,
        seed: 5,
        cache_check_every: 25,
    };
    let run = run_chain(&ctx, &prior, &cfg, None).unwrap();
    assert!(run.summary.acceptance_rate > 0.0);
    assert!(run.summary.mean_gamma.grid.values().iter().all(|v| v.is_finite()));
}

#[test]
fn posterior_mean_beats_prior_baseline_on_easy_problem() {
    // Single-seed smoke version of the recovery experiment: data from the
    // concentric truth at small noise; the posterior mean must land closer
    // to the truth than the prior-only chain mean.
    let grid_n = 33;
    let mesh = build_mesh(0.1).unwrap();
    let lambda = concentric_matrix(3);
    let truth = concentric_truth(2.0, 0.5, grid_n);
    let eps = 0.01;
    let data = synth_spectral(&lambda, eps, 4);
    let ctx = LikelihoodContext::new(data, LinkFunction::default(), mesh);
    let spec = MaternSpec {
        n_modes: 16,
        amplitude: 2.0,
        ..Default::default()
    };
    let sampler = MaternSampler::new(spec, grid_n).unwrap();
    let zeta = make_cutoff(0.5, 0.75, grid_n).unwrap();
    let prior = RescaledPrior::new(sampler, zeta, eps);
    let cfg = ChainConfig {
        beta: 0.2,
        n_iter: 1500,
        burn_in: 500,
        seed: 4,
        cache_check_every: 500,
    };
    let posterior = run_chain(&ctx, &prior, &cfg, Some(&truth)).unwrap();
    let baseline_ctx = ctx.clone().disabled();
    let baseline = run_chain(&baseline_ctx, &prior, &cfg, Some(&truth)).unwrap();
    let post_err = posterior.summary.sup_error.unwrap();
    let base_err = baseline.summary.sup_error.unwrap();
    assert!(
        post_err < base_err,
        "posterior {post_err} not better than baseline {base_err}"
    );
    let acc = posterior.summary.acceptance_rate;
    assert!((0.05..=0.95).contains(&acc), "acceptance {acc}");
}

#[test]
fn staged_chain_burns_in_on_the_coarse_mesh() {
    use calderon_core::inference::run_chain_staged;
    let grid_n = 33;
    let coarse_mesh = build_mesh(0.2).unwrap();
    let fine_mesh = build_mesh(0.1).unwrap();
    let lambda = concentric_matrix(3);
    let truth = concentric_truth(2.0, 0.5, grid_n);
    let eps = 0.01;
    let data = synth_spectral(&lambda, eps, 9);
    let fine = LikelihoodContext::new(data.clone(), LinkFunction::default(), fine_mesh);
    let coarse = LikelihoodContext::new(data, LinkFunction::default(), coarse_mesh);
    let spec = MaternSpec {
        n_modes: 16,
        amplitude: 2.0,
        ..Default::default()
    };
    let sampler = MaternSampler::new(spec, grid_n).unwrap();
    let zeta = make_cutoff(0.5, 0.75, grid_n).unwrap();
    let prior = RescaledPrior::new(sampler, zeta, eps);
    let cfg = ChainConfig {
        beta: 0.2,
        n_iter: 1200,
        burn_in: 400,
        seed: 9,
        cache_check_every: 300,
    };
    let staged = run_chain_staged(&coarse, &fine, &prior, &cfg, Some(&truth)).unwrap();
    assert_eq!(staged.summary.burn_in_mesh_h, Some(0.2));
    assert_eq!(staged.summary.mesh_h, 0.1);
    // The staged run still recovers: error comparable to the single-mesh
    // chain and better than the prior baseline.
    let baseline = run_chain(&fine.clone().disabled(), &prior, &cfg, Some(&truth)).unwrap();
    assert!(staged.summary.sup_error.unwrap() < baseline.summary.sup_error.unwrap());
}

#[test]
fn doubling_chain_length_stays_within_batch_error() {
    // Chain stabilisation: the mean moves by less than a batch-means error
    // estimate when the run doubles.
    let grid_n = 17;
    let mesh = build_mesh(0.2).unwrap();
    let lambda = concentric_matrix(2).resized(4, 4);
    let data = synth_spectral(&lambda, 0.05, 6);
    let ctx = LikelihoodContext::new(data, LinkFunction::default(), mesh);
    let spec = MaternSpec {
        n_modes: 8,
        amplitude: 2.0,
        ..Default::default()
    };
    let sampler = MaternSampler::new(spec, grid_n).unwrap();
    let zeta = make_cutoff(0.5, 0.75, grid_n).unwrap();
    let prior = RescaledPrior::new(sampler, zeta, 0.05);
    let short_cfg = ChainConfig {
        beta: 0.3,
        n_iter: 2000,
        burn_in: 500,
        seed: 11,
        cache_check_every: 0,
    };
    let long_cfg = ChainConfig {
        n_iter: 4000,
        ..short_cfg
    };
    let short = run_chain(&ctx, &prior, &short_cfg, None).unwrap();
    let long = run_chain(&ctx, &prior, &long_cfg, None).unwrap();

    // Batch-means standard error of the center value from the long run.
    let mut state = calderon_core::inference::ChainState::initial(&ctx, grid_n);
    let mut kept = Vec::new();
    for step in 0..long_cfg.n_iter {
        let (next, _) =
            calderon_core::inference::pcn_step(&state, long_cfg.beta, &ctx, &prior, long_cfg.seed)
                .unwrap();
        state = next;
        if step >= long_cfg.burn_in {
            kept.push(state.theta.bilinear(0.0, 0.0));
        }
    }
    let batches = 20;
    let bs = kept.len() / batches;
    let bmeans: Vec<f64> = (0..batches)
        .map(|b| kept[b * bs..(b + 1) * bs].iter().sum::<f64>() / bs as f64)
        .collect();
    let grand = bmeans.iter().sum::<f64>() / batches as f64;
    let bvar = bmeans.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let se = (bvar / batches as f64).sqrt();

    let delta = (short.summary.mean_theta.bilinear(0.0, 0.0)
        - long.summary.mean_theta.bilinear(0.0, 0.0))
    .abs();
    assert!(
        delta <= 4.0 * se + 1e-12,
        "mean moved {delta} vs batch se {se}"
    );
}
