//! Conductivity fields on the unit disk, the admissible parameter classes,
//! the softplus link function and smooth radial cutoffs.
//!
//! Fields are sampled on a uniform Cartesian grid over `[-1,1]²` and masked
//! to the disk; the forward solver reads them back through bilinear
//! interpolation at triangle barycenters.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Errors from field-level operations.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldError {
    /// Operands live on different grids.
    GridMismatch { left: usize, right: usize },
    /// A value at or below the link's lower asymptote cannot be inverted.
    OutsideLinkRange { value: f64, m1: f64 },
    /// Cutoff radii must satisfy `0 < r0 < r1 < 1`.
    BadCutoffRadii { r0: f64, r1: f64 },
}

impl core::fmt::Display for FieldError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FieldError::GridMismatch { left, right } => {
                write!(f, "grid mismatch: {left} vs {right} points per axis")
            }
            FieldError::OutsideLinkRange { value, m1 } => {
                write!(f, "value {value} is not above the lower asymptote {m1}")
            }
            FieldError::BadCutoffRadii { r0, r1 } => {
                write!(f, "cutoff radii must satisfy 0 < r0 < r1 < 1, got ({r0}, {r1})")
            }
        }
    }
}

impl core::error::Error for FieldError {}

/// Scalar samples on the uniform `n x n` grid over `[-1,1]²`, row-major with
/// `x` fastest. Points outside the closed unit disk are carried along but
/// ignored by masked reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    n: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 2);
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n);
        Self { n, values }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(n);
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = g.coords(ix, iy);
                g.values[iy * n + ix] = f(x, y);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Grid spacing along one axis.
    pub fn spacing(&self) -> f64 {
        2.0 / (self.n as f64 - 1.0)
    }

    #[inline]
    pub fn coords(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = self.spacing();
        (-1.0 + h * ix as f64, -1.0 + h * iy as f64)
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.n + ix]
    }

    /// Bilinear interpolation, clamping to the grid.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let h = self.spacing();
        let fx = ((x + 1.0) / h).clamp(0.0, (self.n - 1) as f64);
        let fy = ((y + 1.0) / h).clamp(0.0, (self.n - 1) as f64);
        let ix = (fx as usize).min(self.n - 2);
        let iy = (fy as usize).min(self.n - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = self.at(ix, iy);
        let v10 = self.at(ix + 1, iy);
        let v01 = self.at(ix, iy + 1);
        let v11 = self.at(ix + 1, iy + 1);
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Iterate `(x, y, value)` over grid points inside the closed disk.
    pub fn masked_iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.n;
        (0..n * n).filter_map(move |idx| {
            let (ix, iy) = (idx % n, idx / n);
            let (x, y) = self.coords(ix, iy);
            (x * x + y * y <= 1.0 + 1e-14).then_some((x, y, self.values[idx]))
        })
    }

    /// Supremum norm over the disk mask.
    pub fn masked_sup(&self) -> f64 {
        self.masked_iter()
            .map(|(_, _, v)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pointwise linear combination `a*self + b*other`.
    pub fn axpy(&self, a: f64, other: &Self, b: f64) -> Result<Self, FieldError> {
        if self.n != other.n {
            return Err(FieldError::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        Ok(Self { n: self.n, values })
    }

    /// Pointwise product, typically with a cutoff profile.
    pub fn mul(&self, other: &Self) -> Result<Self, FieldError> {
        if self.n != other.n {
            return Err(FieldError::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| u * v)
            .collect();
        Ok(Self { n: self.n, values })
    }
}

/// Regular link function `Φ(t) = m1 + (1−m1)·softplus(t)/ln 2`.
///
/// A smooth increasing bijection `ℝ → (m1, ∞)` with `Φ(0) = 1` and all
/// derivatives of order ≥ 1 bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFunction {
    pub m1: f64,
}

impl LinkFunction {
    pub fn new(m1: f64) -> Self {
        assert!(m1 > 0.0 && m1 < 1.0);
        Self { m1 }
    }

    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        self.m1 + (1.0 - self.m1) * math::softplus(t) / math::LN_2
    }

    #[inline]
    pub fn invert(&self, y: f64) -> Result<f64, FieldError> {
        if !(y > self.m1) {
            return Err(FieldError::OutsideLinkRange { value: y, m1: self.m1 });
        }
        Ok(math::softplus_inv((y - self.m1) * math::LN_2 / (1.0 - self.m1)))
    }

    /// Supremum of `Φ'`, a global Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        (1.0 - self.m1) / math::LN_2
    }

    /// Lipschitz constant of `Φ^{-1}` on `[m, ∞)` for `m > m1`: the
    /// reciprocal of the derivative infimum `Φ'(Φ^{-1}(m))`.
    pub fn inverse_lipschitz(&self, m: f64) -> Result<f64, FieldError> {
        let t = self.invert(m)?;
        let sigma = 1.0 / (1.0 + math::exp(-t));
        Ok(math::LN_2 / ((1.0 - self.m1) * sigma))
    }
}

impl Default for LinkFunction {
    fn default() -> Self {
        Self { m1: 0.5 }
    }
}

/// A conductivity on the disk with its class metadata: the lower bound `m`
/// and the radius outside which the field is identically one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub grid: GridField,
    pub m: f64,
    pub support_radius: f64,
}

impl ConductivityField {
    /// Homogeneous reference conductivity.
    pub fn ones(n: usize) -> Self {
        Self {
            grid: GridField::from_fn(n, |_, _| 1.0),
            m: 1.0,
            support_radius: 0.0,
        }
    }

    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        self.grid.bilinear(x, y)
    }

    /// Grid membership test for the class with floor `m` and perturbation
    /// support radius `support_radius`.
    pub fn check_membership(&self, m: f64, support_radius: f64) -> bool {
        for (x, y, v) in self.grid.masked_iter() {
            if v < m {
                return false;
            }
            if x * x + y * y > support_radius * support_radius && (v - 1.0).abs() > 1e-12 {
                return false;
            }
        }
        true
    }
}

/// `sup |g1 − g2|` over the disk mask.
pub fn sup_distance(g1: &ConductivityField, g2: &ConductivityField) -> Result<f64, FieldError> {
    if g1.grid.n() != g2.grid.n() {
        return Err(FieldError::GridMismatch {
            left: g1.grid.n(),
            right: g2.grid.n(),
        });
    }
    let mut sup: f64 = 0.0;
    for ((_, _, a), (_, _, b)) in g1.grid.masked_iter().zip(g2.grid.masked_iter()) {
        sup = sup.max((a - b).abs());
    }
    Ok(sup)
}

/// Push a latent field through the link: `γ = Φ ∘ θ`.
///
/// The support radius is detected from the grid as the largest radius at
/// which `θ` is nonzero, so cutoff-multiplied fields land in the class they
/// were built for.
pub fn link_apply(theta: &GridField, link: &LinkFunction) -> ConductivityField {
    let grid = theta.map(|t| link.apply(t));
    let mut support_radius: f64 = 0.0;
    for (x, y, t) in theta.masked_iter() {
        if t != 0.0 {
            support_radius = support_radius.max(math::hypot(x, y));
        }
    }
    // One cell of slack: between grid points the interpolant may still be
    // nonzero.
    if support_radius > 0.0 {
        support_radius = (support_radius + theta.spacing()).min(1.0);
    }
    ConductivityField {
        grid,
        m: link.m1,
        support_radius,
    }
}

/// Invert the link pointwise: `θ = Φ^{-1} ∘ γ`. Fails if any masked value
/// is not above the asymptote `m1`.
pub fn link_invert(gamma: &ConductivityField, link: &LinkFunction) -> Result<GridField, FieldError> {
    for (_, _, v) in gamma.grid.masked_iter() {
        if !(v > link.m1) {
            return Err(FieldError::OutsideLinkRange { value: v, m1: link.m1 });
        }
    }
    // Off-mask values are clamped into range so the inverse stays total on
    // the stored array.
    let floor = link.m1 + 1e-12;
    Ok(gamma.grid.map(|v| {
        let v = v.max(floor + (1.0 - link.m1) * 1e-12);
        link.invert(v).unwrap_or(0.0)
    }))
}

/// Smooth cutoff profile: identically one inside `r0`, identically zero
/// outside `r1`, all radial derivatives vanishing at both junctions.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffField {
    pub grid: GridField,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

/// Value of the standard smooth step at `t = (r1 − radius)/(r1 − r0)`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = math::exp(-1.0 / t);
        let b = math::exp(-1.0 / (1.0 - t));
        a / (a + b)
    }
}

/// Build the radial cutoff `ζ` on an `n x n` grid.
pub fn make_cutoff(r0: f64, r1: f64, grid_n: usize) -> Result<CutoffField, FieldError> {
    if !(0.0 < r0 && r0 < r1 && r1 < 1.0) {
        return Err(FieldError::BadCutoffRadii { r0, r1 });
    }
    let grid = GridField::from_fn(grid_n, |x, y| {
        let rad = math::hypot(x, y);
        smooth_step((r1 - rad) / (r1 - r0))
    });
    Ok(CutoffField {
        grid,
        inner_radius: r0,
        outer_radius: r1,
    })
}

impl CutoffField {
    pub fn eval_radius(&self, radius: f64) -> f64 {
        smooth_step((self.outer_radius - radius) / (self.outer_radius - self.inner_radius))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump_field(n: usize, amp: f64) -> GridField {
        GridField::from_fn(n, |x, y| {
            let r = math::hypot(x, y);
            amp * smooth_step((0.75 - r) / 0.25)
        })
    }

    #[test]
    fn link_at_zero_is_one() {
        let link = LinkFunction::default();
        assert!((link.apply(0.0) - 1.0).abs() < 1e-14);
        let theta = GridField::zeros(17);
        let gamma = link_apply(&theta, &link);
        for (_, _, v) in gamma.grid.masked_iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert_eq!(gamma.support_radius, 0.0);
    }

    #[test]
    fn link_limits() {
        let link = LinkFunction::default();
        assert!((link.apply(-60.0) - link.m1).abs() < 1e-12);
        assert!(link.apply(40.0) > 20.0);
        // Strictly above the asymptote wherever the gap is representable.
        for t in -70..100 {
            assert!(link.apply(t as f64 * 0.5) >= link.m1);
        }
        for t in -60..100 {
            assert!(link.apply(t as f64 * 0.5) > link.m1, "t={}", t as f64 * 0.5);
        }
    }

    #[test]
    fn link_round_trip() {
        let link = LinkFunction::new(0.5);
        let theta = bump_field(33, 1.3);
        let gamma = link_apply(&theta, &link);
        let back = link_invert(&gamma, &link).unwrap();
        let mut sup: f64 = 0.0;
        for ((_, _, a), (_, _, b)) in theta.masked_iter().zip(back.masked_iter()) {
            sup = sup.max((a - b).abs());
        }
        assert!(sup < 1e-10, "sup={sup}");
    }

    #[test]
    fn link_invert_rejects_out_of_range() {
        let link = LinkFunction::new(0.5);
        let gamma = ConductivityField {
            grid: GridField::from_fn(9, |_, _| 0.4),
            m: 0.4,
            support_radius: 0.9,
        };
        assert!(matches!(
            link_invert(&gamma, &link),
            Err(FieldError::OutsideLinkRange { .. })
        ));
    }

    #[test]
    fn sup_distance_examples() {
        let a = ConductivityField::ones(33);
        assert_eq!(sup_distance(&a, &a).unwrap(), 0.0);
        let bump = bump_field(33, 0.3);
        let b = ConductivityField {
            grid: GridField::from_fn(33, |x, y| 1.0 + bump.bilinear(x, y)),
            m: 1.0,
            support_radius: 0.75,
        };
        let d = sup_distance(&a, &b).unwrap();
        assert!((d - 0.3).abs() < 1e-12, "d={d}");
        assert_eq!(d, sup_distance(&b, &a).unwrap());
        let c = ConductivityField::ones(17);
        assert!(matches!(
            sup_distance(&a, &c),
            Err(FieldError::GridMismatch { .. })
        ));
    }

    #[test]
    fn membership_checks() {
        let ones = ConductivityField::ones(25);
        assert!(ones.check_membership(0.5, 0.1));
        assert!(ones.check_membership(1.0, 0.0));

        let low = ConductivityField {
            grid: GridField::from_fn(25, |x, y| 1.0 - 0.6 * bump_field(25, 1.0).bilinear(x, y)),
            m: 0.4,
            support_radius: 0.8,
        };
        assert!(!low.check_membership(0.5, 0.8));

        // Perturbation sticking out past the allowed support.
        let wide = ConductivityField {
            grid: GridField::from_fn(25, |x, y| {
                let r = math::hypot(x, y);
                if (r - 0.95).abs() < 0.02 { 1.3 } else { 1.0 }
            }),
            m: 1.0,
            support_radius: 0.97,
        };
        assert!(!wide.check_membership(0.5, 0.9));
    }

    #[test]
    fn cutoff_profile() {
        let z = make_cutoff(0.5, 0.75, 65).unwrap();
        assert!((z.eval_radius(0.25) - 1.0).abs() < 1e-15);
        assert_eq!(z.eval_radius(0.875), 0.0);
        assert!((z.eval_radius(0.625) - 0.5).abs() < 1e-14);
        for &v in z.grid.values() {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(matches!(
            make_cutoff(0.8, 0.5, 17),
            Err(FieldError::BadCutoffRadii { .. })
        ));
    }

    #[test]
    fn lipschitz_bound_on_random_pairs() {
        let link = LinkFunction::new(0.5);
        let c = link.lipschitz();
        let mut rng = crate::rng::CounterRng::new(11, 0);
        for _ in 0..50 {
            let t0 = 4.0 * rng.standard_normal();
            let t1 = 4.0 * rng.standard_normal();
            assert!((link.apply(t0) - link.apply(t1)).abs() <= c * (t0 - t1).abs() + 1e-14);
        }
    }

    #[test]
    fn inverse_lipschitz_bound_on_random_pairs() {
        let link = LinkFunction::new(0.5);
        let m = 0.8;
        let c = link.inverse_lipschitz(m).unwrap();
        let mut rng = crate::rng::CounterRng::new(12, 0);
        for _ in 0..50 {
            let y0 = m + 3.0 * rng.uniform();
            let y1 = m + 3.0 * rng.uniform();
            let d = (link.invert(y0).unwrap() - link.invert(y1).unwrap()).abs();
            assert!(d <= c * (y0 - y1).abs() + 1e-12);
        }
    }

    #[test]
    fn cutoff_multiplied_fields_are_admissible() {
        let link = LinkFunction::new(0.5);
        let zeta = make_cutoff(0.5, 0.75, 33).unwrap();
        let raw = GridField::from_fn(33, |x, y| math::sin(3.0 * x) + y);
        let theta = raw.mul(&zeta.grid).unwrap();
        let gamma = link_apply(&theta, &link);
        assert!(gamma.check_membership(link.m1, zeta.outer_radius + theta.spacing()));
    }

    #[test]
    fn bilinear_reproduces_linear_fields() {
        let g = GridField::from_fn(21, |x, y| 2.0 * x - 3.0 * y + 0.5);
        for &(x, y) in &[(0.13, -0.41), (0.0, 0.0), (-0.77, 0.3)] {
            assert!((g.bilinear(x, y) - (2.0 * x - 3.0 * y + 0.5)).abs() < 1e-12);
        }
    }
}
