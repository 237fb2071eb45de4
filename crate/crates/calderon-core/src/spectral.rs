//! Spectral algebra on the boundary circle.
//!
//! The Laplace-Beltrami eigenbasis of `∂D = S¹` is the trigonometric system
//! indexed by a single flat index `k`: `φ_0 = 1/√(2π)`,
//! `φ_{2n−1} = cos(nθ)/√π`, `φ_{2n} = sin(nθ)/√π` with eigenvalue
//! `λ_k = ⌈k/2⌉²`. Sobolev norms, Hilbert-Schmidt operator matrices and
//! their projection/rescaling operations are all exact in this basis.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;
use crate::math;

/// Parity of a boundary eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Constant,
    Cosine,
    Sine,
}

/// Flat index into the trigonometric eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BasisIndex(pub usize);

impl BasisIndex {
    /// Frequency `n = ⌈k/2⌉`.
    pub fn mode(self) -> usize {
        self.0.div_ceil(2)
    }

    pub fn parity(self) -> Parity {
        if self.0 == 0 {
            Parity::Constant
        } else if self.0 % 2 == 1 {
            Parity::Cosine
        } else {
            Parity::Sine
        }
    }

    /// Laplace-Beltrami eigenvalue `λ_k = ⌈k/2⌉²`.
    pub fn eigenvalue(self) -> f64 {
        let n = self.mode() as f64;
        n * n
    }

    /// Evaluate `φ_k` at the boundary angle `θ` (orthonormal for the surface
    /// measure on the unit circle).
    pub fn eval(self, theta: f64) -> f64 {
        let n = self.mode() as f64;
        match self.parity() {
            Parity::Constant => 1.0 / math::sqrt(math::TAU),
            Parity::Cosine => math::cos(n * theta) / math::sqrt(math::PI),
            Parity::Sine => math::sin(n * theta) / math::sqrt(math::PI),
        }
    }
}

/// `(1 + λ_k)` for flat index `k` (1-based helpers below use this a lot).
#[inline]
pub fn one_plus_lambda(k: usize) -> f64 {
    let n = k.div_ceil(2) as f64;
    1.0 + n * n
}

/// A boundary function as coefficients against `φ_0, …, φ_{K_max}`.
///
/// Membership in the quotient space `H^s/ℂ` (equivalently the mean-zero
/// space) is represented by a zero `k = 0` coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    pub coeffs: Vec<f64>,
}

impl BoundaryFunction {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(k_max: usize) -> Self {
        Self {
            coeffs: vec![0.0; k_max + 1],
        }
    }

    /// Single basis function `φ_k`.
    pub fn basis(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn k_max(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Pointwise evaluation at angle `θ`.
    pub fn eval(&self, theta: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += c * BasisIndex(k).eval(theta);
            }
        }
        acc
    }

    pub fn l2_norm(&self) -> f64 {
        math::sqrt(self.coeffs.iter().map(|c| c * c).sum())
    }

    /// `H^r(∂D)` norm `(Σ_k (1+λ_k)^r c_k²)^{1/2}` over all stored modes.
    pub fn sobolev_norm(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += math::powf(one_plus_lambda(k), r) * c * c;
            }
        }
        math::sqrt(acc)
    }

    /// Quotient norm `H^r(∂D)/ℂ`: the `k = 0` term is excluded.
    pub fn quotient_norm(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            if c != 0.0 {
                acc += math::powf(one_plus_lambda(k), r) * c * c;
            }
        }
        math::sqrt(acc)
    }
}

/// Finite `J x K` coefficient matrix of an operator against the bases
/// `(φ_j^{(r)})_{j≥1}` and `(φ_k^{(0)})_{k≥1}`, together with its Sobolev
/// heteroscedasticity index `r`.
///
/// Entry `(j, k)` (both 1-based) is `⟨T φ_j^{(r)}, φ_k^{(0)}⟩_{L²(∂D)}`.
/// The quotient basis starts at 1, so the constant mode never appears.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: Vec<f64>,
    j_max: usize,
    k_max: usize,
    r: f64,
}

impl OperatorMatrix {
    pub fn zeros(j_max: usize, k_max: usize, r: f64) -> Self {
        Self {
            entries: vec![0.0; j_max * k_max],
            j_max,
            k_max,
            r,
        }
    }

    pub fn from_entries(entries: Vec<f64>, j_max: usize, k_max: usize, r: f64) -> Self {
        assert_eq!(entries.len(), j_max * k_max);
        Self {
            entries,
            j_max,
            k_max,
            r,
        }
    }

    pub fn from_fn(j_max: usize, k_max: usize, r: f64, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(j_max, k_max, r);
        for j in 1..=j_max {
            for k in 1..=k_max {
                m.set(j, k, f(j, k));
            }
        }
        m
    }

    /// Diagonal operator whose action on the cosine/sine pair of frequency
    /// `n` is multiplication by `diag[n-1]` (stored at `r`).
    pub fn from_mode_diagonal(diag: &[f64], r: f64) -> Self {
        let size = 2 * diag.len();
        let mut m = Self::zeros(size, size, 0.0);
        for (n, &v) in diag.iter().enumerate() {
            let j_cos = 2 * n + 1;
            let j_sin = 2 * n + 2;
            m.set(j_cos, j_cos, v);
            m.set(j_sin, j_sin, v);
        }
        m.rescale_index(r)
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        debug_assert!(j >= 1 && j <= self.j_max && k >= 1 && k <= self.k_max);
        self.entries[(j - 1) * self.k_max + (k - 1)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        debug_assert!(j >= 1 && j <= self.j_max && k >= 1 && k <= self.k_max);
        self.entries[(j - 1) * self.k_max + (k - 1)] = v;
    }

    /// Hilbert-Schmidt norm: Frobenius norm of the coefficient matrix.
    pub fn hs_norm(&self) -> f64 {
        math::sqrt(self.entries.iter().map(|v| v * v).sum())
    }

    /// Coordinate projection `π_{JK}`: zeroes every entry with `j > J` or
    /// `k > K`. Idempotent and norm-contractive.
    pub fn project(&self, j_cut: usize, k_cut: usize) -> Self {
        let mut out = self.clone();
        for j in 1..=self.j_max {
            for k in 1..=self.k_max {
                if j > j_cut || k > k_cut {
                    out.set(j, k, 0.0);
                }
            }
        }
        out
    }

    /// Re-express the same operator against the basis `φ_j^{(r_new)}`:
    /// `t'_{jk} = (1+λ_j)^{(r − r_new)/2} t_{jk}`.
    pub fn rescale_index(&self, r_new: f64) -> Self {
        let mut out = self.clone();
        if r_new == self.r {
            return out;
        }
        let half = (self.r - r_new) / 2.0;
        for j in 1..=self.j_max {
            let factor = math::powf(one_plus_lambda(j), half);
            for k in 1..=self.k_max {
                out.set(j, k, self.get(j, k) * factor);
            }
        }
        out.r = r_new;
        out
    }

    /// Hilbert-Schmidt norm of the represented operator viewed as a map
    /// `H^p(∂D)/ℂ → H^q(∂D)` (exact on the stored truncation).
    pub fn hs_norm_between(&self, p: f64, q: f64) -> f64 {
        let at0 = self.rescale_index(0.0);
        let mut acc = 0.0;
        for j in 1..=self.j_max {
            let wj = math::powf(one_plus_lambda(j), -p);
            for k in 1..=self.k_max {
                let wk = math::powf(one_plus_lambda(k), q);
                let t = at0.get(j, k);
                acc += wj * wk * t * t;
            }
        }
        math::sqrt(acc)
    }

    /// The `H^{1/2}(∂D)/ℂ → H^{−1/2}(∂D)` operator norm `‖·‖_*` of the
    /// represented finite-rank operator: the largest singular value of the
    /// weighted matrix `(1+λ_k)^{−1/4} ⟨Tφ_j^{(0)}, φ_k^{(0)}⟩ (1+λ_j)^{−1/4}`.
    pub fn op_norm_star(&self) -> f64 {
        let at0 = self.rescale_index(0.0);
        let rows = self.k_max;
        let cols = self.j_max;
        let mut w = vec![0.0; rows * cols];
        for k in 1..=rows {
            let wk = math::powf(one_plus_lambda(k), -0.25);
            for j in 1..=cols {
                let wj = math::powf(one_plus_lambda(j), -0.25);
                w[(k - 1) * cols + (j - 1)] = wk * at0.get(j, k) * wj;
            }
        }
        linalg::spectral_norm(&w, rows, cols)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.j_max, other.j_max);
        assert_eq!(self.k_max, other.k_max);
        assert_eq!(self.r, other.r);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            entries,
            j_max: self.j_max,
            k_max: self.k_max,
            r: self.r,
        }
    }

    /// Pad or truncate to a new shape, keeping the index `r`.
    pub fn resized(&self, j_max: usize, k_max: usize) -> Self {
        let mut out = Self::zeros(j_max, k_max, self.r);
        for j in 1..=j_max.min(self.j_max) {
            for k in 1..=k_max.min(self.k_max) {
                out.set(j, k, self.get(j, k));
            }
        }
        out
    }
}
