//! Numerical laboratory core for the statistical Calderón problem on the
//! unit disk.
//!
//! The crate simulates noisy measurements of the Dirichlet-to-Neumann map of
//! an unknown conductivity and recovers the conductivity with a Gaussian
//! process posterior mean computed by preconditioned Crank-Nicolson MCMC.
//! Everything is organised around the difference operator
//! `Λ̃_γ = Λ_γ − Λ_1` expressed in the trigonometric eigenbasis of the
//! boundary circle:
//!
//! * [`spectral`] — boundary eigenbasis, Sobolev norms, Hilbert-Schmidt
//!   operator matrices and the projection/rescaling algebra on them;
//! * [`conductivity`] — grid-sampled conductivities, the admissible classes,
//!   the softplus link function and smooth radial cutoffs;
//! * [`mesh`] / [`fem`] — concentric-ring triangulations of the disk, the P1
//!   Galerkin solver and Dirichlet-to-Neumann assembly through the energy
//!   bilinear identity, with a separation-of-variables oracle for validation;
//! * [`measurement`] — electrode, discrete spectral and continuous
//!   white-noise observation models plus the kernels translating between
//!   them, Kullback-Leibler utilities and the two-point risk bound;
//! * [`prior`] — truncated Fourier Whittle-Matérn field sampler and the
//!   noise-level rescaling of draws;
//! * [`inference`] — white-noise log-likelihood, pCN chain, posterior mean
//!   summaries and the spectral truncation estimator/test.
//!
//! The crate is `no_std` (with `alloc`); all floating point special
//! functions go through [`libm`] so results are bit-reproducible across
//! platforms. Randomness comes from the Philox counter generator in [`rng`]
//! with explicit 64-bit seeds. All public types are immutable values and all
//! operations are pure functions of their inputs, so everything is safe to
//! share and call concurrently.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conductivity;
pub mod fem;
pub mod inference;
pub mod linalg;
pub mod math;
pub mod measurement;
pub mod mesh;
pub mod prior;
pub mod rng;
pub mod spectral;

pub use conductivity::{ConductivityField, CutoffField, GridField, LinkFunction};
pub use fem::{analytic_dtn_concentric, assemble_dtn_matrix, solve_dirichlet, DirichletSolution};
pub use inference::{ChainConfig, ChainRun, ChainState, LikelihoodContext, PosteriorSummary};
pub use measurement::{
    kl_divergence, two_point_risk_bound, ElectrodeData, ElectrodeLayout, SpectralData,
    WhiteNoiseField,
};
pub use mesh::DiskMesh;
pub use prior::{MaternSampler, MaternSpec, PriorDraw, RescaledPrior};
pub use rng::CounterRng;
pub use spectral::{BasisIndex, BoundaryFunction, OperatorMatrix};
