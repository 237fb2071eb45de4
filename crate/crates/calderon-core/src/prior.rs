//! Whittle-Matérn Gaussian field sampler and the noise-level rescaling that
//! turns base draws into prior draws.
//!
//! The base field is a truncated random Fourier series on a period-4 torus
//! covering `[-1,1]²`: independent `N(0,1)` weights on a frequency lattice,
//! carrying the Matérn spectral density
//! `S(w) ∝ (2ν/ℓ² + |w|²)^{-(ν+1)}` with `ν = α − 1` in two dimensions, so
//! the reproducing kernel space of the limit process is the Sobolev space of
//! order `α`. Mode variances are normalized to sum to `amplitude²`, which
//! makes the pointwise variance of a draw exactly `amplitude²`.
//!
//! A prior draw at noise level `ε` is `θ = ε^{2/(α+2)} ζ θ'` for the smooth
//! cutoff `ζ`, shrinking the prior as the data get cleaner.

use alloc::vec;
use alloc::vec::Vec;

use crate::conductivity::{CutoffField, FieldError, GridField};
use crate::math;
use crate::rng::CounterRng;

/// Half period of the sampling torus; the lattice spacing in frequency is
/// `π / TORUS_HALF_PERIOD`.
const TORUS_HALF_PERIOD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum PriorError {
    /// Regularity must be an integer at least 6 (so that it exceeds 3 + d).
    AlphaTooSmall(u32),
    /// Fewer than 8 Fourier modes per axis cannot represent the kernel.
    TooFewModes(usize),
    /// Correlation length and amplitude must be positive.
    BadScale { ell: f64, amplitude: f64 },
    /// Finite-difference seminorm order outside 1..=4.
    UnsupportedOrder(usize),
    Field(FieldError),
}

impl core::fmt::Display for PriorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PriorError::AlphaTooSmall(a) => write!(f, "regularity alpha = {a} must be >= 6"),
            PriorError::TooFewModes(m) => write!(f, "n_modes = {m} must be >= 8"),
            PriorError::BadScale { ell, amplitude } => {
                write!(f, "ell = {ell} and amplitude = {amplitude} must be positive")
            }
            PriorError::UnsupportedOrder(o) => write!(f, "seminorm order {o} outside 1..=4"),
            PriorError::Field(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PriorError {}

impl From<FieldError> for PriorError {
    fn from(e: FieldError) -> Self {
        PriorError::Field(e)
    }
}

/// Parameters of the Whittle-Matérn base prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternSpec {
    /// Integer Sobolev regularity of the reproducing kernel space.
    pub alpha: u32,
    /// Correlation length.
    pub ell: f64,
    /// Marginal standard deviation.
    pub amplitude: f64,
    /// Fourier truncation per axis.
    pub n_modes: usize,
}

impl Default for MaternSpec {
    fn default() -> Self {
        Self {
            alpha: 6,
            ell: 0.4,
            amplitude: 1.0,
            n_modes: 32,
        }
    }
}

impl MaternSpec {
    pub fn validate(&self) -> Result<(), PriorError> {
        if self.alpha < 6 {
            return Err(PriorError::AlphaTooSmall(self.alpha));
        }
        if self.n_modes < 8 {
            return Err(PriorError::TooFewModes(self.n_modes));
        }
        // Zero amplitude is the degenerate-but-valid zero field.
        if !(self.ell > 0.0) || !(self.amplitude >= 0.0) {
            return Err(PriorError::BadScale {
                ell: self.ell,
                amplitude: self.amplitude,
            });
        }
        Ok(())
    }
}

/// Precomputed sampler for one `(spec, grid_n)` pair.
///
/// Draws cost two small complex matrix products; repeated draws (as in a
/// Markov chain) reuse the per-axis phase tables.
#[derive(Debug, Clone)]
pub struct MaternSampler {
    pub spec: MaternSpec,
    pub grid_n: usize,
    /// `√(variance)` per lattice mode `(k1, k2)`, `k1 in 0..=n`, `k2 in -n..=n`,
    /// row-major with `k2` fastest.
    weights: Vec<f64>,
    /// `e^{i ω0 k x}` tables per axis: `(cos, sin)` for `k in 0..=n`, per grid
    /// point; row-major `[x][k]`.
    phase_cos: Vec<f64>,
    phase_sin: Vec<f64>,
}

impl MaternSampler {
    pub fn new(spec: MaternSpec, grid_n: usize) -> Result<Self, PriorError> {
        spec.validate()?;
        let n = spec.n_modes;
        let omega0 = math::PI / TORUS_HALF_PERIOD;
        let nu = spec.alpha as f64 - 1.0;
        let kappa2 = 2.0 * nu / (spec.ell * spec.ell);
        let exponent = -(nu + 1.0);

        // Unnormalized spectral density over the half-plane lattice
        // {k1 > 0} ∪ {k1 = 0, k2 >= 0}; each listed mode carries the mass of
        // itself and its reflection, and the normalization fixes the total
        // to amplitude².
        let width = 2 * n + 1;
        let mut weights = vec![0.0; (n + 1) * width];
        let mut total = 0.0;
        for k1 in 0..=n {
            for (col, k2) in (-(n as i64)..=n as i64).enumerate() {
                if k1 == 0 && k2 < 0 {
                    continue;
                }
                let w2 = omega0 * omega0 * ((k1 * k1) as f64 + (k2 * k2) as f64);
                let s = math::powf(kappa2 + w2, exponent);
                weights[k1 * width + col] = s;
                total += s;
            }
        }
        let scale = spec.amplitude * spec.amplitude / total;
        for w in weights.iter_mut() {
            *w = math::sqrt(*w * scale);
        }

        let mut phase_cos = vec![0.0; grid_n * (n + 1)];
        let mut phase_sin = vec![0.0; grid_n * (n + 1)];
        let h = 2.0 / (grid_n as f64 - 1.0);
        for ix in 0..grid_n {
            let x = -1.0 + h * ix as f64;
            for k in 0..=n {
                let (s, c) = math::sin_cos(omega0 * k as f64 * x);
                phase_cos[ix * (n + 1) + k] = c;
                phase_sin[ix * (n + 1) + k] = s;
            }
        }
        Ok(Self {
            spec,
            grid_n,
            weights,
            phase_cos,
            phase_sin,
        })
    }

    /// One stationary Gaussian field on the grid, deterministic in the
    /// `(seed, stream)` pair.
    pub fn sample_stream(&self, seed: u64, stream: u64) -> GridField {
        let n = self.spec.n_modes;
        let width = 2 * n + 1;
        let g = self.grid_n;
        let mut rng = CounterRng::new(seed, stream);

        // Complex mode coefficients c_k = (a_k − i b_k) √var_k over the
        // half-plane; the field is Re Σ c_k e^{i w·x}.
        let mut coeff_re = vec![0.0; (n + 1) * width];
        let mut coeff_im = vec![0.0; (n + 1) * width];
        for k1 in 0..=n {
            for col in 0..width {
                let w = self.weights[k1 * width + col];
                if w == 0.0 {
                    // Reflected duplicates keep a fixed draw order anyway.
                    let _ = (rng.standard_normal(), rng.standard_normal());
                    continue;
                }
                let a = rng.standard_normal();
                let b = rng.standard_normal();
                coeff_re[k1 * width + col] = w * a;
                coeff_im[k1 * width + col] = -w * b;
            }
        }

        // Stage 1: partial sums over k2 for every x2.
        // s[k1][x2] = Σ_{k2} c_{k1,k2} e^{i ω0 k2 x2}
        let mut s_re = vec![0.0; (n + 1) * g];
        let mut s_im = vec![0.0; (n + 1) * g];
        for k1 in 0..=n {
            for x2 in 0..g {
                let mut re = 0.0;
                let mut im = 0.0;
                for (col, k2) in (-(n as i64)..=n as i64).enumerate() {
                    let cr = coeff_re[k1 * width + col];
                    let ci = coeff_im[k1 * width + col];
                    if cr == 0.0 && ci == 0.0 {
                        continue;
                    }
                    let ka = k2.unsigned_abs() as usize;
                    let pc = self.phase_cos[x2 * (n + 1) + ka];
                    let ps_abs = self.phase_sin[x2 * (n + 1) + ka];
                    let ps = if k2 < 0 { -ps_abs } else { ps_abs };
                    re += cr * pc - ci * ps;
                    im += cr * ps + ci * pc;
                }
                s_re[k1 * g + x2] = re;
                s_im[k1 * g + x2] = im;
            }
        }

        // Stage 2: field(x1, x2) = Re Σ_{k1} e^{i ω0 k1 x1} s[k1][x2].
        let mut values = vec![0.0; g * g];
        for x1 in 0..g {
            for k1 in 0..=n {
                let pc = self.phase_cos[x1 * (n + 1) + k1];
                let ps = self.phase_sin[x1 * (n + 1) + k1];
                let row = k1 * g;
                for x2 in 0..g {
                    values[x2 * g + x1] += pc * s_re[row + x2] - ps * s_im[row + x2];
                }
            }
        }
        GridField::from_values(g, values)
    }

    pub fn sample(&self, seed: u64) -> GridField {
        self.sample_stream(seed, 0)
    }
}

/// Convenience wrapper building a sampler for a single draw.
pub fn sample_base(spec: &MaternSpec, grid_n: usize, seed: u64) -> Result<GridField, PriorError> {
    Ok(MaternSampler::new(*spec, grid_n)?.sample(seed))
}

/// A rescaled prior draw.
#[derive(Debug, Clone)]
pub struct PriorDraw {
    pub theta: GridField,
    pub eps_used: f64,
    pub seed: u64,
}

/// Noise-level rescaling `θ = ε^{2/(α+2)} ζ θ'` (dimension two).
pub fn rescale(
    base: &GridField,
    eps: f64,
    alpha: u32,
    zeta: &CutoffField,
    seed: u64,
) -> Result<PriorDraw, PriorError> {
    let mult = rescale_multiplier(eps, alpha);
    let theta = base.mul(&zeta.grid)?.scale(mult);
    Ok(PriorDraw {
        theta,
        eps_used: eps,
        seed,
    })
}

/// The shrinkage factor `ε^{d/(α+d)}` at `d = 2`.
pub fn rescale_multiplier(eps: f64, alpha: u32) -> f64 {
    math::powf(eps, 2.0 / (alpha as f64 + 2.0))
}

/// The full prior of the inference pipeline: base sampler, cutoff and noise
/// level, drawing `θ = ε^{2/(α+2)} ζ θ'`.
#[derive(Debug, Clone)]
pub struct RescaledPrior {
    pub sampler: MaternSampler,
    pub zeta: CutoffField,
    pub eps: f64,
}

impl RescaledPrior {
    pub fn new(sampler: MaternSampler, zeta: CutoffField, eps: f64) -> Self {
        Self { sampler, zeta, eps }
    }

    pub fn draw(&self, seed: u64, stream: u64) -> GridField {
        let base = self.sampler.sample_stream(seed, stream);
        let mult = rescale_multiplier(self.eps, self.sampler.spec.alpha);
        base.mul(&self.zeta.grid)
            .expect("sampler and cutoff share a grid")
            .scale(mult)
    }
}

/// Finite-difference estimate of the order-`m` Sobolev seminorm over the
/// disk interior: central differences for every multi-index of total order
/// `m` with multinomial weights, integrated over grid points whose stencil
/// stays inside the disk.
pub fn empirical_sobolev_seminorm(field: &GridField, order: usize) -> Result<f64, PriorError> {
    if !(1..=4).contains(&order) {
        return Err(PriorError::UnsupportedOrder(order));
    }
    let n = field.n();
    let h = field.spacing();
    let margin = order as f64 * h + h;
    let r_max = 1.0 - margin;
    if r_max <= 0.0 {
        return Ok(0.0);
    }

    // Central difference along one axis, repeated.
    let diff = |src: &Vec<f64>, axis: usize| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let v = match axis {
                    0 if ix > 0 && ix + 1 < n => {
                        (src[iy * n + ix + 1] - src[iy * n + ix - 1]) / (2.0 * h)
                    }
                    1 if iy > 0 && iy + 1 < n => {
                        (src[(iy + 1) * n + ix] - src[(iy - 1) * n + ix]) / (2.0 * h)
                    }
                    _ => 0.0,
                };
                out[iy * n + ix] = v;
            }
        }
        out
    };

    let binom = |n: usize, k: usize| -> f64 {
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        acc
    };

    let base: Vec<f64> = field.values().to_vec();
    let cell = h * h;
    let mut total = 0.0;
    for ax in 0..=order {
        // Multi-index (ax, order-ax) with multinomial weight C(order, ax).
        let mut d = base.clone();
        for _ in 0..ax {
            d = diff(&d, 0);
        }
        for _ in ax..order {
            d = diff(&d, 1);
        }
        let weight = binom(order, ax);
        let mut acc = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = field.coords(ix, iy);
                if x * x + y * y <= r_max * r_max {
                    acc += d[iy * n + ix] * d[iy * n + ix];
                }
            }
        }
        total += weight * acc * cell;
    }
    Ok(math::sqrt(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductivity::make_cutoff;

    #[test]
    fn spec_validation() {
        assert!(MaternSpec::default().validate().is_ok());
        assert!(matches!(
            MaternSpec { alpha: 5, ..Default::default() }.validate(),
            Err(PriorError::AlphaTooSmall(5))
        ));
        assert!(matches!(
            MaternSpec { n_modes: 4, ..Default::default() }.validate(),
            Err(PriorError::TooFewModes(4))
        ));
        assert!(matches!(
            MaternSpec { ell: 0.0, ..Default::default() }.validate(),
            Err(PriorError::BadScale { .. })
        ));
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let spec = MaternSpec {
            amplitude: 0.0,
            ..Default::default()
        };
        let sampler = MaternSampler::new(spec, 17).unwrap();
        let f = sampler.sample(3);
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            MaternSpec { amplitude: -1.0, ..Default::default() }.validate(),
            Err(PriorError::BadScale { .. })
        ));
    }

    #[test]
    fn draws_are_deterministic_and_distinct() {
        let sampler = MaternSampler::new(MaternSpec::default(), 17).unwrap();
        let a = sampler.sample(10);
        let b = sampler.sample(10);
        assert_eq!(a.values(), b.values());
        let c = sampler.sample(11);
        let mut diff: f64 = 0.0;
        for (u, v) in a.values().iter().zip(c.values()) {
            diff = diff.max((u - v).abs());
        }
        assert!(diff > 0.0);
    }

    #[test]
    fn amplitude_scales_linearly() {
        let base = MaternSpec::default();
        let double = MaternSpec { amplitude: 2.0, ..base };
        let s1 = MaternSampler::new(base, 17).unwrap();
        let s2 = MaternSampler::new(double, 17).unwrap();
        let a = s1.sample(5);
        let b = s2.sample(5);
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((2.0 * u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn center_variance_matches_amplitude() {
        let spec = MaternSpec { n_modes: 16, ..Default::default() };
        let sampler = MaternSampler::new(spec, 9).unwrap();
        let reps = 2000;
        let mut sum2 = 0.0;
        for seed in 0..reps {
            let f = sampler.sample(seed);
            let v = f.bilinear(0.0, 0.0);
            sum2 += v * v;
        }
        let var = sum2 / reps as f64;
        assert!(
            (var - 1.0).abs() < 0.1,
            "empirical variance {var} should be within 10% of 1"
        );
    }

    #[test]
    fn rescale_multiplier_exponent() {
        assert!((rescale_multiplier(1e-4, 6) - 0.1).abs() < 1e-12);
        assert!((rescale_multiplier(1.0, 6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_is_linear_and_supported() {
        let zeta = make_cutoff(0.5, 0.75, 33).unwrap();
        let base = GridField::from_fn(33, |_, _| 3.0);
        let draw = rescale(&base, 1e-4, 6, &zeta, 0).unwrap();
        // Constant base: θ = 0.1 · 3 · ζ exactly.
        for (i, &v) in draw.theta.values().iter().enumerate() {
            let z = zeta.grid.values()[i];
            assert!((v - 0.3 * z).abs() < 1e-13);
        }
        // Support is inside the outer cutoff radius.
        for (x, y, v) in draw.theta.masked_iter() {
            if math::hypot(x, y) >= zeta.outer_radius {
                assert_eq!(v, 0.0);
            }
        }
        // Linearity: rescale(c·base) = c·rescale(base).
        let scaled = rescale(&base.scale(2.5), 1e-4, 6, &zeta, 0).unwrap();
        for (u, v) in draw.theta.values().iter().zip(scaled.theta.values()) {
            assert!((2.5 * u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn shrinkage_is_monotone_in_eps() {
        let zeta = make_cutoff(0.5, 0.75, 17).unwrap();
        let sampler = MaternSampler::new(MaternSpec { n_modes: 8, ..Default::default() }, 17).unwrap();
        let base = sampler.sample(42);
        let mut prev = f64::INFINITY;
        for &eps in &[1.0, 0.1, 0.01, 0.001] {
            let draw = rescale(&base, eps, 6, &zeta, 42).unwrap();
            let sup = draw.theta.masked_sup();
            assert!(sup <= prev, "eps={eps}: {sup} !<= {prev}");
            prev = sup;
        }
    }

    #[test]
    fn prior_draws_are_admissible_conductivities() {
        use crate::conductivity::{link_apply, LinkFunction};
        let spec = MaternSpec { n_modes: 8, ..Default::default() };
        let sampler = MaternSampler::new(spec, 33).unwrap();
        let zeta = make_cutoff(0.5, 0.75, 33).unwrap();
        let link = LinkFunction::new(0.5);
        let prior = RescaledPrior::new(sampler, zeta, 0.01);
        for seed in 0..100 {
            let theta = prior.draw(seed, 0);
            let gamma = link_apply(&theta, &link);
            assert!(
                gamma.check_membership(0.5, 0.75 + theta.spacing() + 1e-12),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn seminorm_of_constant_vanishes() {
        let f = GridField::from_fn(41, |_, _| 2.7);
        for order in 1..=4 {
            assert_eq!(empirical_sobolev_seminorm(&f, order).unwrap(), 0.0);
        }
        assert!(matches!(
            empirical_sobolev_seminorm(&f, 5),
            Err(PriorError::UnsupportedOrder(5))
        ));
    }

    #[test]
    fn seminorm_of_coordinate_function() {
        // |x|_{H¹ seminorm}² over the disk = area π, up to the boundary
        // margin the stencil cannot reach.
        let f = GridField::from_fn(161, |x, _| x);
        let s = empirical_sobolev_seminorm(&f, 1).unwrap();
        let margin = 3.0 * f.spacing();
        let expected = math::sqrt(math::PI * (1.0 - margin) * (1.0 - margin));
        assert!(
            (s - expected).abs() < 0.05 * expected,
            "s={s} expected~{expected}"
        );
    }

    #[test]
    fn seminorm_refines_stably() {
        let smooth = |x: f64, y: f64| math::sin(2.0 * x) * math::cos(y) + 0.3 * x * y;
        let coarse = empirical_sobolev_seminorm(&GridField::from_fn(81, smooth), 2).unwrap();
        let fine = empirical_sobolev_seminorm(&GridField::from_fn(161, smooth), 2).unwrap();
        assert!(
            (coarse - fine).abs() < 0.05 * fine,
            "coarse={coarse} fine={fine}"
        );
    }

    #[test]
    fn draws_have_finite_fourth_order_seminorm() {
        let sampler = MaternSampler::new(MaternSpec::default(), 65).unwrap();
        let f = sampler.sample(1);
        let s = empirical_sobolev_seminorm(&f, 4).unwrap();
        assert!(s.is_finite() && s > 0.0);
    }
}
