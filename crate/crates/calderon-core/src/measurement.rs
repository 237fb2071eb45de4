//! Noise models for Dirichlet-to-Neumann data and the kernels that
//! translate between them.
//!
//! Three observation schemes share one underlying Gaussian structure:
//!
//! * **electrode** — `Y_{pq} = ⟨Λ̃_γ ψ_p, ψ_q⟩ + ε g_{pq}` for normalized
//!   indicators `ψ_p` of `P` equal boundary arcs;
//! * **discrete spectral** — `Y_{jk} = ⟨Λ̃_γ φ_j^{(r)}, φ_k^{(0)}⟩ + ε g_{jk}`
//!   on a `J x K` window of the trigonometric basis;
//! * **continuous** — the isonormal process `Y(T) = ⟨Λ̃_γ, T⟩ + ε W(T)`,
//!   realized lazily through counter-indexed Gaussian coordinates, so any
//!   finite-rank functional can be evaluated exactly and repeatably.
//!
//! The module also carries the closed-form Kullback-Leibler divergence of
//! the spectral model and the two-point minimax risk bound.

use alloc::vec;
use alloc::vec::Vec;

use crate::conductivity::ConductivityField;
use crate::fem::{assemble_dtn_matrix, FemError};
use crate::math;
use crate::mesh::DiskMesh;
use crate::rng::{fill_gaussian_row, gaussian_coord};
use crate::spectral::{BasisIndex, OperatorMatrix, Parity};

/// Stream tags for coordinate-indexed noise.
const STREAM_SPECTRAL: u64 = 0x5350_4543; // "SPEC"
const STREAM_ELECTRODE: u64 = 0x454c_4543; // "ELEC"
const STREAM_REMAINDER: u64 = 0x52454d; // "REM"

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementError {
    /// Operands carry different heteroscedasticity indices.
    RMismatch { left: f64, right: f64 },
    /// Matrix windows disagree.
    ShapeMismatch,
    Fem(FemError),
}

impl core::fmt::Display for MeasurementError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MeasurementError::RMismatch { left, right } => {
                write!(f, "heteroscedasticity index mismatch: {left} vs {right}")
            }
            MeasurementError::ShapeMismatch => write!(f, "matrix windows disagree"),
            MeasurementError::Fem(e) => write!(f, "forward solve failed: {e}"),
        }
    }
}

impl core::error::Error for MeasurementError {}

impl From<FemError> for MeasurementError {
    fn from(e: FemError) -> Self {
        MeasurementError::Fem(e)
    }
}

/// One noisy dataset in the discrete spectral model.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// `J x K` matrix, row-major, 1-based indices `(j, k)`.
    pub y: Vec<f64>,
    pub j_max: usize,
    pub k_max: usize,
    pub eps: f64,
    pub r: f64,
    pub seed: u64,
}

impl SpectralData {
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.y[(j - 1) * self.k_max + (k - 1)]
    }

    /// View the raw data as an operator coefficient matrix.
    pub fn as_matrix(&self) -> OperatorMatrix {
        OperatorMatrix::from_entries(self.y.clone(), self.j_max, self.k_max, self.r)
    }
}

/// Draw `Y = Λ̃ + ε G` on the window of the given coefficient matrix.
///
/// The Gaussian coordinates are addressed by `(seed, j, k)`, so a dataset at
/// seed `s` is exactly the restriction of the continuous-model realisation
/// [`WhiteNoiseField`] with the same seed.
pub fn synth_spectral(lambda: &OperatorMatrix, eps: f64, seed: u64) -> SpectralData {
    let j_max = lambda.j_max();
    let k_max = lambda.k_max();
    let mut y = vec![0.0; j_max * k_max];
    let mut row = vec![0.0; k_max];
    for j in 1..=j_max {
        fill_gaussian_row(seed, STREAM_SPECTRAL, j as u64, 1, &mut row);
        for k in 1..=k_max {
            y[(j - 1) * k_max + (k - 1)] = lambda.get(j, k) + eps * row[k - 1];
        }
    }
    SpectralData {
        y,
        j_max,
        k_max,
        eps,
        r: lambda.r(),
        seed,
    }
}

/// `P` equal arcs `I_p = [2π(p−1)/P, 2πp/P)` with normalizers
/// `c_p = (P/2π)^{1/2}`, so the `ψ_p` are exactly orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElectrodeLayout {
    pub p: usize,
}

impl ElectrodeLayout {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1);
        Self { p }
    }

    pub fn arc_length(&self) -> f64 {
        math::TAU / self.p as f64
    }

    /// Endpoints of arc `p` (1-based).
    pub fn arc(&self, p: usize) -> (f64, f64) {
        let w = self.arc_length();
        ((p - 1) as f64 * w, p as f64 * w)
    }

    /// Exact Gram matrix of the `ψ_p`: the identity, because the arcs are
    /// disjoint and the normalizers absorb the arc length.
    pub fn gram(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.p * self.p];
        for i in 0..self.p {
            g[i * self.p + i] = 1.0;
        }
        g
    }

    /// Closed-form arc integral `a_{jp} = ⟨φ_j, ψ_p⟩`.
    pub fn coeff(&self, j: usize, p: usize) -> f64 {
        let (lo, hi) = self.arc(p);
        let c = math::sqrt(self.p as f64 / math::TAU);
        let idx = BasisIndex(j);
        let n = idx.mode() as f64;
        match idx.parity() {
            Parity::Constant => c * (hi - lo) / math::sqrt(math::TAU),
            Parity::Cosine => c * (math::sin(n * hi) - math::sin(n * lo)) / (n * math::sqrt(math::PI)),
            Parity::Sine => c * (math::cos(n * lo) - math::cos(n * hi)) / (n * math::sqrt(math::PI)),
        }
    }

    /// Coefficient table `A[j][p] = a_{jp}` for `1 ≤ j ≤ modes`, row-major
    /// `modes x P`.
    pub fn coeff_table(&self, modes: usize) -> Vec<f64> {
        let mut a = vec![0.0; modes * self.p];
        for j in 1..=modes {
            for p in 1..=self.p {
                a[(j - 1) * self.p + (p - 1)] = self.coeff(j, p);
            }
        }
        a
    }

    /// Gram matrix `G_{jl} = ⟨φ_j^P, φ_l^P⟩ = Σ_p a_{jp} a_{lp}` of the
    /// arc-system projections of the first `modes` eigenfunctions.
    pub fn projected_gram(&self, modes: usize) -> Vec<f64> {
        let a = self.coeff_table(modes);
        let mut g = vec![0.0; modes * modes];
        for j in 0..modes {
            for l in j..modes {
                let mut s = 0.0;
                for p in 0..self.p {
                    s += a[j * self.p + p] * a[l * self.p + p];
                }
                g[j * modes + l] = s;
                g[l * modes + j] = s;
            }
        }
        g
    }

    /// Largest deviation `|G_{jl} G_{km} − δ_{jl} δ_{km}|` of the projected
    /// noise covariance from the identity, over a `(j_win, k_win)` window.
    /// This is the exact covariance error of [`electrode_to_spectral`].
    pub fn covariance_deviation(&self, j_win: usize, k_win: usize) -> f64 {
        let modes = j_win.max(k_win);
        let g = self.projected_gram(modes);
        let mut worst: f64 = 0.0;
        for j in 0..j_win {
            for l in 0..j_win {
                for k in 0..k_win {
                    for m in 0..k_win {
                        let c = g[j * modes + l] * g[k * modes + m];
                        let target = if j == l && k == m { 1.0 } else { 0.0 };
                        worst = worst.max((c - target).abs());
                    }
                }
            }
        }
        worst
    }
}

/// One noisy dataset in the electrode model.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeData {
    /// `P x P` matrix, row-major, 1-based `(p, q)`.
    pub y: Vec<f64>,
    pub p: usize,
    pub eps: f64,
    pub seed: u64,
    /// Estimated size of the spectral tail dropped when the noiseless part
    /// was contracted from a finite window.
    pub tail_estimate: f64,
}

impl ElectrodeData {
    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.y[(p - 1) * self.p + (q - 1)]
    }

    /// The contraction window was too short for the requested accuracy.
    pub fn truncation_warning(&self) -> bool {
        self.tail_estimate > 1e-6
    }
}

/// Noiseless electrode matrix `B_{pq} = Σ_{jk} a_{jp} a_{kq} t_{jk}` from a
/// spectral coefficient matrix (converted to index `r = 0` internally).
pub fn electrode_signal(lambda: &OperatorMatrix, layout: &ElectrodeLayout) -> Vec<f64> {
    let at0 = lambda.rescale_index(0.0);
    let jm = at0.j_max();
    let km = at0.k_max();
    let p = layout.p;
    let aj = layout.coeff_table(jm);
    let ak = layout.coeff_table(km);
    // Z[j][q] = Σ_k t_{jk} a_{kq}
    let mut z = vec![0.0; jm * p];
    for j in 0..jm {
        for k in 0..km {
            let t = at0.entries()[j * km + k];
            if t != 0.0 {
                for q in 0..p {
                    z[j * p + q] += t * ak[k * p + q];
                }
            }
        }
    }
    // B[p][q] = Σ_j a_{jp} Z[j][q]
    let mut b = vec![0.0; p * p];
    for j in 0..jm {
        for pp in 0..p {
            let a = aj[j * p + pp];
            if a != 0.0 {
                for q in 0..p {
                    b[pp * p + q] += a * z[j * p + q];
                }
            }
        }
    }
    b
}

/// Crude upper proxy for the spectral tail dropped by a finite contraction
/// window: Frobenius mass of the outermost mode block, doubled.
fn tail_estimate_of(lambda: &OperatorMatrix) -> f64 {
    let at0 = lambda.rescale_index(0.0);
    let jm = at0.j_max();
    let km = at0.k_max();
    if jm < 3 || km < 3 {
        return f64::INFINITY;
    }
    let mut frontier = 0.0f64;
    for j in 1..=jm {
        for k in 1..=km {
            if j + 1 >= jm || k + 1 >= km {
                frontier += at0.get(j, k) * at0.get(j, k);
            }
        }
    }
    2.0 * math::sqrt(frontier)
}

/// Electrode synthesis from a pre-assembled spectral matrix.
pub fn synth_electrode_from_matrix(
    lambda: &OperatorMatrix,
    eps: f64,
    layout: &ElectrodeLayout,
    seed: u64,
) -> ElectrodeData {
    let mut y = electrode_signal(lambda, layout);
    let p = layout.p;
    let mut row = vec![0.0; p];
    for pp in 1..=p {
        fill_gaussian_row(seed, STREAM_ELECTRODE, pp as u64, 1, &mut row);
        for q in 1..=p {
            y[(pp - 1) * p + (q - 1)] += eps * row[q - 1];
        }
    }
    ElectrodeData {
        y,
        p,
        eps,
        seed,
        tail_estimate: tail_estimate_of(lambda),
    }
}

/// Electrode synthesis for a conductivity: assembles `Λ̃_γ` on a window of
/// `j_int` modes (default `8 P`) and contracts with the arc coefficients.
pub fn synth_electrode(
    gamma: &ConductivityField,
    eps: f64,
    layout: &ElectrodeLayout,
    mesh: &DiskMesh,
    seed: u64,
    j_int: Option<usize>,
) -> Result<ElectrodeData, MeasurementError> {
    let modes = j_int.unwrap_or(8 * layout.p);
    let lambda = assemble_dtn_matrix(gamma, modes, modes, 0.0, mesh)?;
    Ok(synth_electrode_from_matrix(&lambda, eps, layout, seed))
}

/// Spectral data recovered from electrode data by the projection kernel
/// `Y'_{jk} = Σ_{pq} a_{jp} a_{kq} Y_{pq}`; the noise is correlated with
/// covariance `G_{jl} G_{km}` for the reported Gram matrix `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSpectralData {
    pub y: Vec<f64>,
    pub j_max: usize,
    pub k_max: usize,
    pub eps: f64,
    /// Gram matrix of the projected eigenfunctions, `max(J,K)` square.
    pub gram: Vec<f64>,
    /// Marks that the noise covariance is `G ⊗ G`, not the identity.
    pub correlated: bool,
}

pub fn electrode_to_spectral(
    data: &ElectrodeData,
    layout: &ElectrodeLayout,
    j_max: usize,
    k_max: usize,
) -> ProjectedSpectralData {
    let p = layout.p;
    debug_assert_eq!(data.p, p);
    let modes = j_max.max(k_max);
    let a = layout.coeff_table(modes);
    // Z[j][q] = Σ_p a_{jp} Y_{pq}
    let mut z = vec![0.0; j_max * p];
    for j in 0..j_max {
        for pp in 0..p {
            let w = a[j * p + pp];
            if w != 0.0 {
                for q in 0..p {
                    z[j * p + q] += w * data.y[pp * p + q];
                }
            }
        }
    }
    let mut y = vec![0.0; j_max * k_max];
    for j in 0..j_max {
        for k in 0..k_max {
            let mut s = 0.0;
            for q in 0..p {
                s += z[j * p + q] * a[k * p + q];
            }
            y[j * k_max + k] = s;
        }
    }
    ProjectedSpectralData {
        y,
        j_max,
        k_max,
        eps: data.eps,
        gram: layout.projected_gram(modes),
        correlated: true,
    }
}

/// Lazy realisation of the continuous model `Y = Λ̃_γ + ε W` on the
/// σ-algebra of finite-rank functionals.
///
/// Signal coefficients are stored up to a master truncation and treated as
/// zero beyond it (the operator is infinitely smoothing, so the tail is
/// negligible at any polynomial rate); noise coordinates `g_{jk}` are pure
/// functions of `(seed, j, k)`, which realizes the isonormal process exactly
/// on every coordinate ever queried without storing state.
#[derive(Debug, Clone)]
pub struct WhiteNoiseField {
    pub lambda: OperatorMatrix,
    pub eps: f64,
    pub seed: u64,
}

impl WhiteNoiseField {
    pub fn new(lambda: OperatorMatrix, eps: f64, seed: u64) -> Self {
        Self { lambda, eps, seed }
    }

    /// Evaluate `Y(T)` for a finite-rank functional with coefficient matrix
    /// `t` at the same heteroscedasticity index.
    pub fn eval(&self, t: &OperatorMatrix) -> Result<f64, MeasurementError> {
        if t.r() != self.lambda.r() {
            return Err(MeasurementError::RMismatch {
                left: t.r(),
                right: self.lambda.r(),
            });
        }
        let mut acc = 0.0;
        for j in 1..=t.j_max() {
            for k in 1..=t.k_max() {
                let tv = t.get(j, k);
                if tv == 0.0 {
                    continue;
                }
                let signal = if j <= self.lambda.j_max() && k <= self.lambda.k_max() {
                    self.lambda.get(j, k)
                } else {
                    0.0
                };
                acc += tv
                    * (signal
                        + self.eps * gaussian_coord(self.seed, STREAM_SPECTRAL, j as u64, k as u64));
            }
        }
        Ok(acc)
    }

    /// The discrete spectral dataset is the restriction of this field to
    /// the basis functionals of a `(J, K)` window.
    pub fn restrict(&self, j_max: usize, k_max: usize) -> SpectralData {
        let padded = self.lambda.resized(j_max, k_max);
        synth_spectral(&padded, self.eps, self.seed)
    }
}

/// Sample the electrode experiment exactly from the continuous model by
/// evaluating `Y(ψ_p ⊗ ψ_q)`.
///
/// The arcs pair against all of `L²(∂D)`, so the noise field is extended
/// with constant-mode coordinates (row and column index 0); the Parseval
/// chain `Σ_{j≥0} a_{jp} a_{jl} = ⟨ψ_p, ψ_l⟩ = δ_{pl}` then makes the
/// output noise exactly white. The signal has no constant components
/// (`Λ̃_γ` kills constants and maps into mean-zero data), so only the noise
/// sees the extension. Coefficients are expanded over `modes` basis pairs
/// and the dropped tail is replaced by an independent Gaussian remainder
/// with the exact residual variance `1 − S_p S_q` (`S_p` the expanded mass
/// of `ψ_p`), so every output variance is exactly `ε²` and covariances
/// deviate from the identity only through tail cross-terms.
pub fn spectral_to_electrode(
    field: &WhiteNoiseField,
    layout: &ElectrodeLayout,
    modes: usize,
) -> Result<ElectrodeData, MeasurementError> {
    if field.lambda.r() != 0.0 {
        return Err(MeasurementError::RMismatch {
            left: field.lambda.r(),
            right: 0.0,
        });
    }
    let p = layout.p;
    // Coefficient table over j in 0..=modes (constant mode first).
    let rows = modes + 1;
    let mut a = vec![0.0; rows * p];
    for j in 0..rows {
        for q in 1..=p {
            a[j * p + (q - 1)] = layout.coeff(j, q);
        }
    }

    // Signal: Gram contraction of the stored coefficients.
    let mut y = electrode_signal(&field.lambda, layout);

    // Coordinate Gaussians over (j, k) in {0..=modes}²; indices with j ≥ 1
    // and k ≥ 1 agree with what `eval` and `restrict` would query.
    let mut g = vec![0.0; rows * rows];
    for j in 0..rows {
        fill_gaussian_row(
            field.seed,
            STREAM_SPECTRAL,
            j as u64,
            0,
            &mut g[j * rows..(j + 1) * rows],
        );
    }
    // Z[q][j] = Σ_k g_{jk} a_{kq}
    let mut z = vec![0.0; p * rows];
    for j in 0..rows {
        for k in 0..rows {
            let gv = g[j * rows + k];
            for q in 0..p {
                z[q * rows + j] += gv * a[k * p + q];
            }
        }
    }
    // Expanded coordinate mass per electrode; the exact total is one.
    let mut s_mass = vec![0.0; p];
    for pp in 0..p {
        let mut s = 0.0;
        for j in 0..rows {
            let av = a[j * p + pp];
            s += av * av;
        }
        s_mass[pp] = s;
    }
    for pp in 0..p {
        for q in 0..p {
            let mut noise = 0.0;
            for j in 0..rows {
                noise += a[j * p + pp] * z[q * rows + j];
            }
            let residual_var = (1.0 - s_mass[pp] * s_mass[q]).max(0.0);
            let rem = math::sqrt(residual_var)
                * gaussian_coord(field.seed, STREAM_REMAINDER, pp as u64 + 1, q as u64 + 1);
            y[pp * p + q] += field.eps * (noise + rem);
        }
    }
    Ok(ElectrodeData {
        y,
        p,
        eps: field.eps,
        seed: field.seed,
        tail_estimate: tail_estimate_of(&field.lambda),
    })
}

/// Kullback-Leibler divergence between the spectral-model laws of two
/// coefficient matrices at noise level `eps`: `½ ε^{-2} ‖L1 − L0‖²`.
pub fn kl_divergence(
    l1: &OperatorMatrix,
    l0: &OperatorMatrix,
    eps: f64,
) -> Result<f64, MeasurementError> {
    if l1.r() != l0.r() {
        return Err(MeasurementError::RMismatch {
            left: l1.r(),
            right: l0.r(),
        });
    }
    if l1.j_max() != l0.j_max() || l1.k_max() != l0.k_max() {
        return Err(MeasurementError::ShapeMismatch);
    }
    let d = l1.sub(l0).hs_norm();
    Ok(0.5 * d * d / (eps * eps))
}

/// Minimax risk lower bound from a two-point argument: when two hypotheses
/// at the target separation have Kullback-Leibler divergence at most `μ`,
/// the testing risk is at least `(1/3)(1 − (μ + √(2μ))/ln 2)`.
pub fn two_point_risk_bound(mu: f64) -> f64 {
    (1.0 - (mu + math::sqrt(2.0 * mu)) / math::LN_2) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn electrode_gram_is_identity() {
        for &p in &[1usize, 4, 16] {
            let layout = ElectrodeLayout::new(p);
            let g = layout.gram();
            for i in 0..p {
                for j in 0..p {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(g[i * p + j], want);
                }
            }
        }
    }

    #[test]
    fn electrode_coeff_closed_forms() {
        let layout = ElectrodeLayout::new(4);
        let want = math::sqrt(2.0) / math::PI;
        assert!((layout.coeff(1, 1) - want).abs() < TOL);
        for p in 1..=4 {
            assert!((layout.coeff(0, p) - 0.5).abs() < TOL); // 1/√P
        }
        // Bessel: Σ_p a_{jp}² ≤ 1, approaching 1 as P grows.
        for &(p, j) in &[(8usize, 3usize), (32, 3), (128, 3)] {
            let layout = ElectrodeLayout::new(p);
            let mass: f64 = (1..=p).map(|q| layout.coeff(j, q).powi(2)).sum();
            assert!(mass <= 1.0 + TOL, "P={p} mass={mass}");
            if p == 128 {
                assert!(mass > 0.999, "P={p} mass={mass}");
            }
        }
    }

    #[test]
    fn constant_mode_coeffs_sum_exactly() {
        // Σ_p a_{kp} = ⟨φ_k, Σ_p ψ_p⟩ ∝ ⟨φ_k, 1⟩ = 0 for k ≥ 1.
        let layout = ElectrodeLayout::new(8);
        for j in 1..=9usize {
            let s: f64 = (1..=8).map(|p| layout.coeff(j, p)).sum();
            assert!(s.abs() < 1e-13, "j={j} s={s}");
        }
    }

    #[test]
    fn synth_spectral_examples() {
        let lambda = OperatorMatrix::zeros(40, 40, 0.0);
        let d = synth_spectral(&lambda, 0.3, 7);
        let mean: f64 = d.y.iter().sum::<f64>() / d.y.len() as f64;
        let var: f64 = d.y.iter().map(|v| v * v).sum::<f64>() / d.y.len() as f64;
        assert!(mean.abs() < 3.0 * 0.3 / 40.0, "mean={mean}");
        assert!((var - 0.09).abs() < 3.0 * 0.09 * math::sqrt(2.0 / 1600.0), "var={var}");

        // eps -> 0 returns the coefficients exactly; same seed, same data.
        let m = OperatorMatrix::from_fn(3, 3, 0.0, |j, k| (j + 2 * k) as f64 * 0.1);
        let clean = synth_spectral(&m, 0.0, 9);
        assert_eq!(clean.y, m.entries());
        assert_eq!(synth_spectral(&m, 0.5, 11), synth_spectral(&m, 0.5, 11));
        assert_ne!(synth_spectral(&m, 0.5, 11).y, synth_spectral(&m, 0.5, 12).y);
    }

    #[test]
    fn variance_law_chi2_over_eps_grid() {
        // Aggregate χ² test at level 0.001 on all synthesized noise.
        let lambda = OperatorMatrix::zeros(40, 40, 0.0);
        for &eps in &[1.0, 0.1, 0.01] {
            let d = synth_spectral(&lambda, eps, 21);
            let n = d.y.len() as f64;
            let stat: f64 = d.y.iter().map(|v| (v / eps) * (v / eps)).sum();
            // z_{0.9995} = 3.29 for the normal approximation of χ²_n.
            assert!(
                (stat - n).abs() < 3.29 * math::sqrt(2.0 * n),
                "eps={eps} stat={stat}"
            );
        }
    }

    #[test]
    fn kl_examples() {
        let a = OperatorMatrix::from_fn(3, 3, 0.0, |j, k| (j * k) as f64 * 0.01);
        assert_eq!(kl_divergence(&a, &a, 0.5).unwrap(), 0.0);

        let mut l0 = OperatorMatrix::zeros(2, 2, 0.0);
        let mut l1 = OperatorMatrix::zeros(2, 2, 0.0);
        l0.set(1, 1, 0.0);
        l1.set(1, 1, 0.2);
        let kl = kl_divergence(&l1, &l0, 0.1).unwrap();
        assert!((kl - 2.0).abs() < TOL);

        let bad = OperatorMatrix::zeros(2, 2, 1.0);
        assert!(matches!(
            kl_divergence(&l1, &bad, 0.1),
            Err(MeasurementError::RMismatch { .. })
        ));
        let small = OperatorMatrix::zeros(1, 2, 0.0);
        assert!(matches!(
            kl_divergence(&l1, &small, 0.1),
            Err(MeasurementError::ShapeMismatch)
        ));
    }

    #[test]
    fn two_point_bound_values() {
        assert!((two_point_risk_bound(0.0) - 1.0 / 3.0).abs() < TOL);
        assert!((two_point_risk_bound(0.01) - 0.260_515_053_423_917_5).abs() < 1e-12);
        // Root of bound(μ) = 1/4 is bracketed in (0.01, 0.05).
        assert!(two_point_risk_bound(0.01) > 0.25);
        assert!(two_point_risk_bound(0.05) < 0.25);
        let mut lo = 0.01;
        let mut hi = 0.05;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if two_point_risk_bound(mid) > 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(lo > 0.01 && hi < 0.05);
    }

    #[test]
    fn white_field_restriction_matches_direct_synthesis() {
        let lambda = OperatorMatrix::from_fn(6, 6, 0.0, |j, k| {
            if j == k { 0.3 / (j as f64) } else { 0.0 }
        });
        let field = WhiteNoiseField::new(lambda.clone(), 0.05, 77);
        let direct = synth_spectral(&lambda, 0.05, 77);
        let restricted = field.restrict(6, 6);
        assert_eq!(direct.y, restricted.y);

        // Evaluation against a basis functional reads off one entry.
        let mut t = OperatorMatrix::zeros(6, 6, 0.0);
        t.set(2, 3, 1.0);
        let v = field.eval(&t).unwrap();
        assert!((v - direct.get(2, 3)).abs() < TOL);

        // Functionals beyond the stored window still get noise.
        let mut far = OperatorMatrix::zeros(9, 9, 0.0);
        far.set(9, 9, 1.0);
        let v_far = field.eval(&far).unwrap();
        assert_ne!(v_far, 0.0);
        assert_eq!(v_far, field.eval(&far).unwrap());
    }

    #[test]
    fn electrode_signal_row_sums_vanish() {
        // Σ_q ⟨Λ̃ψ_p, ψ_q⟩ ∝ ⟨Λ̃ψ_p, 1⟩ = 0 because the quotient basis
        // kills constants; with exact arc integrals this telescopes at any
        // truncation.
        let lambda = OperatorMatrix::from_mode_diagonal(&[0.2, 0.05, 0.01, 0.003], 0.0);
        let layout = ElectrodeLayout::new(8);
        let b = electrode_signal(&lambda, &layout);
        for p in 0..8 {
            let row: f64 = (0..8).map(|q| b[p * 8 + q]).sum();
            assert!(row.abs() < 1e-13, "p={p} row={row}");
        }
    }

    #[test]
    fn electrode_synthesis_from_rotationally_symmetric_operator() {
        // A mode-diagonal operator commutes with rotations, so the
        // noiseless electrode matrix is symmetric and circulant.
        let lambda = OperatorMatrix::from_mode_diagonal(&[0.18, 0.04, 0.009, 0.002], 0.0);
        let layout = ElectrodeLayout::new(8);
        let d = synth_electrode_from_matrix(&lambda, 0.0, &layout, 5);
        for p in 1..=8usize {
            for q in 1..=8usize {
                let s = d.get(p, q);
                assert!((s - d.get(q, p)).abs() < 1e-13);
                let p2 = p % 8 + 1;
                let q2 = q % 8 + 1;
                assert!((s - d.get(p2, q2)).abs() < 1e-12, "not circulant at ({p},{q})");
            }
        }
    }

    #[test]
    fn electrode_to_spectral_noiseless_round_trip() {
        // With ε = 0 and a generous electrode count the composition
        // recovers the projected operator.
        let lambda = OperatorMatrix::from_mode_diagonal(&[0.2, 0.05, 0.01], 0.0);
        let layout = ElectrodeLayout::new(256);
        let data = synth_electrode_from_matrix(&lambda, 0.0, &layout, 3);
        let back = electrode_to_spectral(&data, &layout, 4, 4);
        let truth = lambda.resized(4, 4);
        let mut err: f64 = 0.0;
        for j in 0..4 {
            for k in 0..4 {
                err = err.max((back.y[j * 4 + k] - truth.get(j + 1, k + 1)).abs());
            }
        }
        assert!(err < 1e-3, "err={err}");
        assert!(back.correlated);
    }

    #[test]
    fn projected_gram_deviation_decreases_in_p() {
        let mut prev = f64::INFINITY;
        for &p in &[16usize, 32, 64, 128] {
            let layout = ElectrodeLayout::new(p);
            let dev = layout.covariance_deviation(3, 3);
            assert!(dev < prev, "P={p}: {dev} !< {prev}");
            prev = dev;
        }
    }

    #[test]
    fn spectral_to_electrode_zero_eps_is_gram_contraction() {
        let lambda = OperatorMatrix::from_mode_diagonal(&[0.2, 0.05, 0.01], 0.0);
        let layout = ElectrodeLayout::new(8);
        let field = WhiteNoiseField::new(lambda.clone(), 0.0, 3);
        let d = spectral_to_electrode(&field, &layout, 64).unwrap();
        let b = electrode_signal(&lambda, &layout);
        for i in 0..64 {
            assert!((d.y[i] - b[i]).abs() < TOL);
        }
    }

    #[test]
    fn spectral_to_electrode_pure_noise_has_unit_variances() {
        // Aggregate variance across replicates and electrode pairs.
        let layout = ElectrodeLayout::new(4);
        let lambda = OperatorMatrix::zeros(2, 2, 0.0);
        let reps = 2000;
        let mut sum2 = 0.0;
        let mut count = 0usize;
        for rep in 0..reps {
            let field = WhiteNoiseField::new(lambda.clone(), 1.0, 1000 + rep);
            let d = spectral_to_electrode(&field, &layout, 128).unwrap();
            for v in &d.y {
                sum2 += v * v;
                count += 1;
            }
        }
        let var = sum2 / count as f64;
        let se = math::sqrt(2.0 / count as f64);
        assert!((var - 1.0).abs() < 4.0 * se, "var={var} se={se}");
    }
}
