//! White-noise log-likelihood, the preconditioned Crank-Nicolson chain and
//! posterior-mean summaries, plus the spectral truncation estimator and its
//! associated test.
//!
//! The likelihood of a latent field `θ` is evaluated on the finite spectral
//! window of the data: `γ = Φ∘θ` is pushed through the forward solver and
//!
//! ```text
//! ℓ(θ) = ε^{-2} Σ_{jk} Y_{jk} t_{jk} − ½ ε^{-2} Σ_{jk} t_{jk}²
//! ```
//!
//! is the exact log-density ratio of the discrete model. The pCN proposal
//! `ϑ = √(1−β²) θ + β ξ` with `ξ` a fresh rescaled prior draw preserves the
//! prior, so the accept rule needs only the likelihood difference and the
//! chain stays well posed on the function space.

use alloc::vec;
use alloc::vec::Vec;

use crate::conductivity::{link_apply, ConductivityField, GridField, LinkFunction};
use crate::fem::{
    assemble_stiffness, boundary_values, dirichlet_solve_assembled, harmonic_mode_gradient,
    harmonic_mode_value, support_triangles, triangle_gradient, FemError,
};
use crate::math;
use crate::measurement::SpectralData;
use crate::mesh::DiskMesh;
use crate::prior::RescaledPrior;
use crate::rng::{mix, CounterRng};
use crate::spectral::{BoundaryFunction, OperatorMatrix};

/// Everything needed to evaluate the likelihood of a latent field.
#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    pub data: SpectralData,
    pub link: LinkFunction,
    pub mesh: DiskMesh,
    /// Zero disables the data term entirely (prior-only chains).
    pub inv_eps2: f64,
}

impl LikelihoodContext {
    pub fn new(data: SpectralData, link: LinkFunction, mesh: DiskMesh) -> Self {
        let inv_eps2 = 1.0 / (data.eps * data.eps);
        Self {
            data,
            link,
            mesh,
            inv_eps2,
        }
    }

    /// Same context with the data term switched off; the posterior then
    /// equals the prior and the chain samples it.
    pub fn disabled(mut self) -> Self {
        self.inv_eps2 = 0.0;
        self
    }

    pub fn likelihood_enabled(&self) -> bool {
        self.inv_eps2 > 0.0
    }

    /// Forward map: assemble `Λ̃_{Φ∘θ}` on the data window.
    pub fn forward(&self, theta: &GridField) -> Result<OperatorMatrix, FemError> {
        let gamma = link_apply(theta, &self.link);
        assemble_window(
            &|x, y| gamma.bilinear(x, y),
            self.data.j_max,
            self.data.k_max,
            self.data.r,
            &self.mesh,
        )
    }

    /// Log-likelihood of an already-assembled forward image.
    pub fn loglik_of(&self, lambda: &OperatorMatrix) -> f64 {
        if self.inv_eps2 == 0.0 {
            return 0.0;
        }
        let mut dot = 0.0;
        let mut norm2 = 0.0;
        for j in 1..=self.data.j_max {
            for k in 1..=self.data.k_max {
                let t = lambda.get(j, k);
                dot += self.data.get(j, k) * t;
                norm2 += t * t;
            }
        }
        self.inv_eps2 * dot - 0.5 * self.inv_eps2 * norm2
    }
}

/// Whole-window assembly identical to the fem module path but without the
/// per-call stiffness rebuild boilerplate; kept here so the chain can share
/// it with [`LikelihoodContext::forward`].
fn assemble_window(
    gamma_at: &dyn Fn(f64, f64) -> f64,
    j_max: usize,
    k_max: usize,
    r: f64,
    mesh: &DiskMesh,
) -> Result<OperatorMatrix, FemError> {
    let a = assemble_stiffness(mesh, gamma_at);
    let supp = support_triangles(mesh, gamma_at);
    let mut out = OperatorMatrix::zeros(j_max, k_max, 0.0);
    if !supp.is_empty() {
        let mut ref_grads = vec![0.0f64; 2 * k_max * supp.len()];
        for (si, s) in supp.iter().enumerate() {
            for k in 1..=k_max {
                let (gx, gy) = harmonic_mode_gradient(k, s.bx, s.by);
                let w = s.coeff * s.area;
                ref_grads[2 * ((k - 1) * supp.len() + si)] = w * gx;
                ref_grads[2 * ((k - 1) * supp.len() + si) + 1] = w * gy;
            }
        }
        for j in 1..=j_max {
            let f = BoundaryFunction::basis(j);
            let bvals = boundary_values(&f, mesh);
            let init: Vec<f64> = mesh
                .vertices
                .iter()
                .map(|p| harmonic_mode_value(j, p[0], p[1]))
                .collect();
            let sol = dirichlet_solve_assembled(&a, mesh, &bvals, Some(&init))?;
            let grads: Vec<(f64, f64)> = supp
                .iter()
                .map(|s| triangle_gradient(mesh, s.t, &sol.u))
                .collect();
            for k in 1..=k_max {
                let mut acc = 0.0;
                for (si, &(ux, uy)) in grads.iter().enumerate() {
                    let base = 2 * ((k - 1) * supp.len() + si);
                    acc += ux * ref_grads[base] + uy * ref_grads[base + 1];
                }
                out.set(j, k, acc);
            }
        }
    }
    Ok(out.rescale_index(r))
}

/// Log-likelihood of a latent field.
pub fn log_likelihood(theta: &GridField, ctx: &LikelihoodContext) -> Result<f64, FemError> {
    if !ctx.likelihood_enabled() {
        return Ok(0.0);
    }
    let lambda = ctx.forward(theta)?;
    Ok(ctx.loglik_of(&lambda))
}

/// Current chain position with its cached forward image and likelihood.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: GridField,
    pub lambda: OperatorMatrix,
    pub loglik: f64,
    pub step: usize,
}

impl ChainState {
    /// Initial state at `θ = 0` (`γ ≡ 1`, zero forward image, zero
    /// likelihood).
    pub fn initial(ctx: &LikelihoodContext, grid_n: usize) -> Self {
        Self {
            theta: GridField::zeros(grid_n),
            lambda: OperatorMatrix::zeros(ctx.data.j_max, ctx.data.k_max, ctx.data.r),
            loglik: 0.0,
            step: 0,
        }
    }
}

/// One pCN step. Deterministic given `(seed, state.step)`: the proposal
/// noise and the accept coin come from per-step substreams.
pub fn pcn_step(
    state: &ChainState,
    beta: f64,
    ctx: &LikelihoodContext,
    prior: &RescaledPrior,
    seed: u64,
) -> Result<(ChainState, bool), FemError> {
    let stream = mix(0x7063_6e00 ^ state.step as u64); // "pcn"
    let xi = prior.draw(seed, stream);
    let proposal = state
        .theta
        .axpy(math::sqrt(1.0 - beta * beta), &xi, beta)
        .expect("chain and prior share a grid");
    let (lambda, loglik) = if ctx.likelihood_enabled() {
        let lam = ctx.forward(&proposal)?;
        let ll = ctx.loglik_of(&lam);
        (lam, ll)
    } else {
        (state.lambda.clone(), 0.0)
    };
    let mut coin = CounterRng::new(seed, mix(0x6163_6300 ^ state.step as u64)); // "acc"
    let accept = math::ln(coin.uniform()) < loglik - state.loglik;
    if accept {
        Ok((
            ChainState {
                theta: proposal,
                lambda,
                loglik,
                step: state.step + 1,
            },
            true,
        ))
    } else {
        Ok((
            ChainState {
                theta: state.theta.clone(),
                lambda: state.lambda.clone(),
                loglik: state.loglik,
                step: state.step + 1,
            },
            false,
        ))
    }
}

/// Chain configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub beta: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Recompute the cached likelihood from scratch every this many steps
    /// and fail loudly on drift.
    pub cache_check_every: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            beta: 0.05,
            n_iter: 20_000,
            burn_in: 5_000,
            seed: 1,
            cache_check_every: 100,
        }
    }
}

/// One row of the chain trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub loglik: f64,
    pub accepted: bool,
    pub sup_theta: f64,
}

/// Posterior summary of one finished chain.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean_theta: GridField,
    pub mean_gamma: ConductivityField,
    pub acceptance_rate: f64,
    pub chain_length: usize,
    pub burn_in: usize,
    /// `sup |γ̂ − γ₀|` over the disk when the truth was supplied.
    pub sup_error: Option<f64>,
    /// Mesh resolution of the likelihood used after burn-in.
    pub mesh_h: f64,
    /// Mesh resolution during burn-in when a coarse stage was used.
    pub burn_in_mesh_h: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub summary: PosteriorSummary,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainError {
    Fem(FemError),
    /// Cached likelihood drifted from a recomputation.
    CacheIncoherent { step: usize, cached: f64, fresh: f64 },
    /// Burn-in must leave at least one retained state.
    BadWindow { n_iter: usize, burn_in: usize },
}

impl core::fmt::Display for ChainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChainError::Fem(e) => write!(f, "{e}"),
            ChainError::CacheIncoherent { step, cached, fresh } => write!(
                f,
                "cached log-likelihood {cached} disagrees with recomputation {fresh} at step {step}"
            ),
            ChainError::BadWindow { n_iter, burn_in } => {
                write!(f, "burn-in {burn_in} leaves no retained states of {n_iter}")
            }
        }
    }
}

impl core::error::Error for ChainError {}

impl From<FemError> for ChainError {
    fn from(e: FemError) -> Self {
        ChainError::Fem(e)
    }
}

/// Run a pCN chain and average the post-burn-in states.
pub fn run_chain(
    ctx: &LikelihoodContext,
    prior: &RescaledPrior,
    cfg: &ChainConfig,
    truth: Option<&ConductivityField>,
) -> Result<ChainRun, ChainError> {
    run_chain_impl(ctx, None, prior, cfg, truth)
}

/// Two-stage variant: burn in against a cheaper coarse-mesh likelihood,
/// then switch to the fine context (recomputing the cached forward image at
/// the handover) and average only fine-stage states.
pub fn run_chain_staged(
    coarse: &LikelihoodContext,
    fine: &LikelihoodContext,
    prior: &RescaledPrior,
    cfg: &ChainConfig,
    truth: Option<&ConductivityField>,
) -> Result<ChainRun, ChainError> {
    run_chain_impl(fine, Some(coarse), prior, cfg, truth)
}

fn run_chain_impl(
    ctx: &LikelihoodContext,
    burn_in_ctx: Option<&LikelihoodContext>,
    prior: &RescaledPrior,
    cfg: &ChainConfig,
    truth: Option<&ConductivityField>,
) -> Result<ChainRun, ChainError> {
    if cfg.burn_in >= cfg.n_iter {
        return Err(ChainError::BadWindow {
            n_iter: cfg.n_iter,
            burn_in: cfg.burn_in,
        });
    }
    let grid_n = prior.sampler.grid_n;
    let mut state = ChainState::initial(ctx, grid_n);
    let mut trace = Vec::with_capacity(cfg.n_iter);
    let mut accepted_total = 0usize;
    let mut mean = vec![0.0f64; grid_n * grid_n];
    let mut retained = 0usize;

    for step in 0..cfg.n_iter {
        let stage_ctx = match burn_in_ctx {
            Some(coarse) if step < cfg.burn_in => coarse,
            _ => ctx,
        };
        // Hand over from the coarse stage: the cached image was assembled
        // on the other mesh, so refresh it.
        if burn_in_ctx.is_some() && step == cfg.burn_in && ctx.likelihood_enabled() {
            let lambda = ctx.forward(&state.theta)?;
            state.loglik = ctx.loglik_of(&lambda);
            state.lambda = lambda;
        }
        let (next, accepted) = pcn_step(&state, cfg.beta, stage_ctx, prior, cfg.seed)?;
        state = next;
        if accepted {
            accepted_total += 1;
        }
        if stage_ctx.likelihood_enabled()
            && cfg.cache_check_every > 0
            && (step + 1) % cfg.cache_check_every == 0
        {
            let fresh = stage_ctx.loglik_of(&state.lambda);
            let scale = state.loglik.abs().max(1.0);
            if (fresh - state.loglik).abs() > 1e-9 * scale {
                return Err(ChainError::CacheIncoherent {
                    step: state.step,
                    cached: state.loglik,
                    fresh,
                });
            }
        }
        trace.push(TraceStep {
            step: state.step,
            loglik: state.loglik,
            accepted,
            sup_theta: state.theta.masked_sup(),
        });
        if step >= cfg.burn_in {
            for (m, v) in mean.iter_mut().zip(state.theta.values()) {
                *m += v;
            }
            retained += 1;
        }
    }

    for m in mean.iter_mut() {
        *m /= retained as f64;
    }
    let mean_theta = GridField::from_values(grid_n, mean);
    let mean_gamma = link_apply(&mean_theta, &ctx.link);
    let sup_error = match truth {
        Some(g0) => {
            let mut sup: f64 = 0.0;
            for ((_, _, a), (_, _, b)) in
                mean_gamma.grid.masked_iter().zip(g0.grid.masked_iter())
            {
                sup = sup.max((a - b).abs());
            }
            Some(sup)
        }
        None => None,
    };
    Ok(ChainRun {
        summary: PosteriorSummary {
            mean_theta,
            mean_gamma,
            acceptance_rate: accepted_total as f64 / cfg.n_iter as f64,
            chain_length: cfg.n_iter,
            burn_in: cfg.burn_in,
            sup_error,
            mesh_h: ctx.mesh.h,
            burn_in_mesh_h: burn_in_ctx.map(|c| c.mesh.h),
        },
        trace,
    })
}

/// Spectral truncation estimator: read the data matrix itself as the
/// operator estimate, cut to the `J x J` corner.
pub fn truncation_estimator(data: &SpectralData, j_cut: usize) -> OperatorMatrix {
    data.as_matrix().project(j_cut, j_cut)
}

/// The plug-in choice `J = ⌊η/ε⌋` with `η = ε^{α/(α+2)}` (dimension two)
/// balancing bias at smoothness `α` against the `ε² J²` variance.
pub fn truncation_level(eps: f64, alpha: f64) -> usize {
    let eta = math::powf(eps, alpha / (alpha + 2.0));
    math::floor(eta / eps) as usize
}

/// Test between a reference operator and the data: reject when
/// `‖Λ̂ − π_{JJ} Λ̃_{γ₀}‖ > threshold`.
pub fn test_statistic(
    data: &SpectralData,
    gamma0_matrix: &OperatorMatrix,
    j_cut: usize,
    threshold: f64,
) -> bool {
    let est = truncation_estimator(data, j_cut);
    let reference = gamma0_matrix
        .resized(data.j_max, data.k_max)
        .project(j_cut, j_cut);
    est.sub(&reference).hs_norm() > threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::synth_spectral;

    fn tiny_ctx(eps: f64) -> LikelihoodContext {
        let mesh = crate::mesh::build_mesh(0.25).unwrap();
        let lambda = OperatorMatrix::zeros(3, 3, 0.0);
        let data = synth_spectral(&lambda, eps, 5);
        LikelihoodContext::new(data, LinkFunction::default(), mesh)
    }

    #[test]
    fn zero_theta_has_zero_likelihood() {
        let ctx = tiny_ctx(0.1);
        let theta = GridField::zeros(17);
        let ll = log_likelihood(&theta, &ctx).unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn noiseless_data_gives_half_norm() {
        // With Y set exactly to Λ̃ the likelihood is ½ ε^{-2} ‖Λ̃‖².
        let mesh = crate::mesh::build_mesh(0.25).unwrap();
        let lambda = OperatorMatrix::from_fn(3, 3, 0.0, |j, k| 0.01 * (j + k) as f64);
        let eps = 0.2;
        let data = synth_spectral(&lambda, 0.0, 1);
        let mut ctx = LikelihoodContext::new(data, LinkFunction::default(), mesh);
        ctx.inv_eps2 = 1.0 / (eps * eps);
        let ll = ctx.loglik_of(&lambda);
        let expected = 0.5 * lambda.hs_norm().powi(2) / (eps * eps);
        assert!((ll - expected).abs() < 1e-12);
    }

    #[test]
    fn truncation_estimator_noiseless_is_projection() {
        let lambda = OperatorMatrix::from_fn(5, 5, 0.0, |j, k| 1.0 / (j + k) as f64);
        let data = synth_spectral(&lambda, 0.0, 3);
        let est = truncation_estimator(&data, 3);
        assert_eq!(est, lambda.project(3, 3));
    }

    #[test]
    fn truncation_level_formula() {
        // η/ε = ε^{-2/(α+2)}; at α = 6, ε = (1/16)⁴ this is 16.
        let eps = math::powf(1.0 / 16.0, 4.0);
        assert_eq!(truncation_level(eps, 6.0), 16);
    }

    #[test]
    fn test_statistic_edges() {
        let lambda = OperatorMatrix::from_fn(4, 4, 0.0, |j, k| 0.1 * (j == k) as u8 as f64);
        let clean = synth_spectral(&lambda, 0.0, 2);
        // ε = 0, data = truth: statistic must not reject at any positive
        // threshold.
        assert!(!test_statistic(&clean, &lambda, 4, 1e-12));
        // Far alternative rejects.
        let far = OperatorMatrix::from_fn(4, 4, 0.0, |j, k| 5.0 * (j == k) as u8 as f64);
        assert!(test_statistic(&clean, &far, 4, 1.0));
    }

    #[test]
    fn pcn_beta_zero_keeps_state_and_accepts() {
        let ctx = tiny_ctx(0.1).disabled();
        let sampler =
            crate::prior::MaternSampler::new(crate::prior::MaternSpec { n_modes: 8, ..Default::default() }, 17)
                .unwrap();
        let zeta = crate::conductivity::make_cutoff(0.5, 0.75, 17).unwrap();
        let prior = RescaledPrior::new(sampler, zeta, 0.1);
        let state = ChainState::initial(&ctx, 17);
        let (next, accepted) = pcn_step(&state, 0.0, &ctx, &prior, 9).unwrap();
        assert!(accepted);
        for (u, v) in state.theta.values().iter().zip(next.theta.values()) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn forced_minus_infinity_rejects() {
        // An impossible proposal (ℓ = −∞) must never be accepted; emulate
        // by comparing the accept rule directly.
        let delta = f64::NEG_INFINITY;
        let mut coin = CounterRng::new(4, 4);
        for _ in 0..100 {
            assert!(!(math::ln(coin.uniform()) < delta));
        }
    }

    #[test]
    fn chain_window_validation() {
        let ctx = tiny_ctx(0.1).disabled();
        let sampler =
            crate::prior::MaternSampler::new(crate::prior::MaternSpec { n_modes: 8, ..Default::default() }, 17)
                .unwrap();
        let zeta = crate::conductivity::make_cutoff(0.5, 0.75, 17).unwrap();
        let prior = RescaledPrior::new(sampler, zeta, 0.1);
        let cfg = ChainConfig {
            n_iter: 10,
            burn_in: 10,
            ..Default::default()
        };
        assert!(matches!(
            run_chain(&ctx, &prior, &cfg, None),
            Err(ChainError::BadWindow { .. })
        ));
    }

    #[test]
    fn prior_only_chain_is_deterministic_and_summarised() {
        let ctx = tiny_ctx(0.1).disabled();
        let sampler =
            crate::prior::MaternSampler::new(crate::prior::MaternSpec { n_modes: 8, ..Default::default() }, 17)
                .unwrap();
        let zeta = crate::conductivity::make_cutoff(0.5, 0.75, 17).unwrap();
        let prior = RescaledPrior::new(sampler, zeta, 0.5);
        let cfg = ChainConfig {
            beta: 0.3,
            n_iter: 200,
            burn_in: 50,
            seed: 8,
            cache_check_every: 50,
        };
        let a = run_chain(&ctx, &prior, &cfg, None).unwrap();
        let b = run_chain(&ctx, &prior, &cfg, None).unwrap();
        assert_eq!(a.summary.mean_theta.values(), b.summary.mean_theta.values());
        assert_eq!(a.summary.acceptance_rate, 1.0); // prior-only accepts all
        assert_eq!(a.trace.len(), 200);
        assert!(a.summary.mean_gamma.grid.values().iter().all(|&v| v > 0.5));
    }
}
