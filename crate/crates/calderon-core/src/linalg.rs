//! Small self-contained linear algebra: CSR sparse matrices, a Jacobi
//! preconditioned conjugate gradient solver and a power-iteration spectral
//! norm for small dense matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Compressed sparse row matrix (square, symmetric usage only).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unordered triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0f64; triplets.len()];
        let mut cursor = counts.clone();
        for &(i, j, v) in triplets {
            let at = cursor[i];
            cols[at] = j;
            vals[at] = v;
            cursor[i] += 1;
        }
        // Sort each row by column and merge duplicates.
        let mut row_ptr = vec![0usize; n + 1];
        let mut out_cols = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        for i in 0..n {
            let lo = counts[i];
            let hi = counts[i + 1];
            let mut row: Vec<(usize, f64)> =
                (lo..hi).map(|t| (cols[t], vals[t])).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                if let Some(last) = out_cols.last() {
                    if *last == c && out_cols.len() > row_ptr[i] {
                        let k = out_vals.len() - 1;
                        out_vals[k] += v;
                        continue;
                    }
                }
                out_cols.push(c);
                out_vals.push(v);
            }
            row_ptr[i + 1] = out_cols.len();
        }
        Self {
            n,
            row_ptr,
            col_idx: out_cols,
            vals: out_vals,
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[t] * x[self.col_idx[t]];
            }
            y[i] = acc;
        }
    }

    /// `y = A x` restricted to rows flagged active, treating inactive
    /// entries of `x` as zero. Used for the interior block of a Dirichlet
    /// problem without copying the matrix.
    pub fn matvec_masked(&self, x: &[f64], y: &mut [f64], active: &[bool]) {
        for i in 0..self.n {
            if !active[i] {
                y[i] = 0.0;
                continue;
            }
            let mut acc = 0.0;
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[t];
                if active[j] {
                    acc += self.vals[t] * x[j];
                }
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for t in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[t] == i {
                    d[i] = self.vals[t];
                }
            }
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Jacobi preconditioned conjugate gradients on the rows/columns flagged in
/// `active`; inactive coordinates of `x` are left untouched.
///
/// Solves to relative residual `rel_tol` (measured against `‖b‖`); returns a
/// non-converged outcome instead of an error so callers can decide.
pub fn cg_masked(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    active: &[bool],
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = a.n;
    let diag = a.diagonal();
    let mut inv_d = vec![0.0; n];
    for i in 0..n {
        if active[i] {
            inv_d[i] = if diag[i].abs() > 0.0 { 1.0 / diag[i] } else { 1.0 };
        }
    }
    let b_norm = math::sqrt(
        b.iter()
            .zip(active)
            .filter(|&(_, &m)| m)
            .map(|(v, _)| v * v)
            .sum::<f64>(),
    );
    if b_norm == 0.0 {
        for i in 0..n {
            if active[i] {
                x[i] = 0.0;
            }
        }
        return CgOutcome {
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        };
    }

    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    a.matvec_masked(x, &mut ax, active);
    for i in 0..n {
        r[i] = if active[i] { b[i] - ax[i] } else { 0.0 };
    }
    let mut z: Vec<f64> = (0..n).map(|i| r[i] * inv_d[i]).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let mut res = math::sqrt(dot(&r, &r)) / b_norm;
    let mut iters = 0;
    while res > rel_tol && iters < max_iter {
        a.matvec_masked(&p, &mut ap, active);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Not positive definite on the active block.
            return CgOutcome {
                iterations: iters,
                rel_residual: res,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            if active[i] {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            if active[i] {
                p[i] = z[i] + beta * p[i];
            }
        }
        res = math::sqrt(dot(&r, &r)) / b_norm;
        iters += 1;
    }
    CgOutcome {
        iterations: iters,
        rel_residual: res,
        converged: res <= rel_tol,
    }
}

/// Largest singular value of a dense row-major `rows x cols` matrix by power
/// iteration on `AᵀA`. Deterministic start, converges to 1e-13 relative or
/// 500 iterations, whichever first.
pub fn spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    debug_assert_eq!(a.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let frob2: f64 = a.iter().map(|v| v * v).sum();
    if frob2 == 0.0 {
        return 0.0;
    }
    // Slightly uneven start so symmetric sign patterns cannot trap the
    // iteration in a null direction.
    let mut v: Vec<f64> = (0..cols).map(|j| 1.0 + 0.01 * (j as f64)).collect();
    let norm0 = math::sqrt(dot(&v, &v));
    for x in v.iter_mut() {
        *x /= norm0;
    }
    let mut w = vec![0.0; rows];
    let mut sigma2 = 0.0;
    for _ in 0..500 {
        for i in 0..rows {
            let mut s = 0.0;
            for j in 0..cols {
                s += a[i * cols + j] * v[j];
            }
            w[i] = s;
        }
        let mut vt = vec![0.0; cols];
        for i in 0..rows {
            let wi = w[i];
            for j in 0..cols {
                vt[j] += a[i * cols + j] * wi;
            }
        }
        let new_sigma2 = dot(&w, &w);
        let norm = math::sqrt(dot(&vt, &vt));
        if norm == 0.0 {
            return 0.0;
        }
        for j in 0..cols {
            v[j] = vt[j] / norm;
        }
        if new_sigma2 > 0.0 && (new_sigma2 - sigma2).abs() <= 1e-13 * new_sigma2 {
            sigma2 = new_sigma2;
            break;
        }
        sigma2 = new_sigma2;
    }
    math::sqrt(sigma2)
}

/// Ordinary least squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn csr_matvec_with_duplicates() {
        // [[2, 1], [1, 3]] assembled from duplicate triplets.
        let a = CsrMatrix::from_triplets(
            2,
            &[(0, 0, 1.0), (0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)],
        );
        assert_eq!(a.nnz(), 4);
        let mut y = vec![0.0; 2];
        a.matvec(&[1.0, 2.0], &mut y);
        assert_eq!(y, vec![4.0, 7.0]);
    }

    #[test]
    fn cg_solves_spd_system() {
        // 1D Laplacian with Dirichlet ends folded in.
        let n = 50;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &trip);
        let active = vec![true; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 % 7.0) - 3.0).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let out = cg_masked(&a, &b, &mut x, &active, 1e-12, 10 * n);
        assert!(out.converged);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_masked_respects_inactive_rows() {
        let a = CsrMatrix::from_triplets(
            3,
            &[
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        );
        let active = vec![true, true, false];
        let b = vec![1.0, 0.0, 99.0];
        let mut x = vec![0.0, 0.0, 5.0];
        let out = cg_masked(&a, &b, &mut x, &active, 1e-12, 100);
        assert!(out.converged);
        // x[2] must be untouched; solve [[2,-1],[-1,2]] x = [1,0].
        assert_eq!(x[2], 5.0);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-10);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = [3.0, 0.0, 0.0, 0.0, -4.0, 0.0]; // 2x3
        assert!((spectral_norm(&a, 2, 3) - 4.0).abs() < 1e-10);
        assert_eq!(spectral_norm(&[0.0; 6], 2, 3), 0.0);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((ls_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}
