//! P1 Galerkin solver for the conductivity equation on the disk and
//! assembly of the Dirichlet-to-Neumann difference operator.
//!
//! Entries of `Λ̃_γ = Λ_γ − Λ_1` are computed through the bilinear energy
//! identity
//!
//! ```text
//! ⟨(Λ_γ − Λ_1) f, g⟩_{L²(∂D)} = ∫_D (γ − 1) ∇u_{γ,f} · ∇u_{1,g}
//! ```
//!
//! which needs one numerical solve per boundary basis function `f = φ_j`
//! while the reference solutions `u_{1,φ_k}` are exact harmonic extensions
//! `r^n cos(nθ)`, `r^n sin(nθ)`. The identity evaluates a smooth functional
//! of the discrete solution, which converges one order faster than
//! differentiating traces.

use alloc::vec;
use alloc::vec::Vec;

use crate::conductivity::ConductivityField;
use crate::linalg::{cg_masked, CgOutcome, CsrMatrix};
use crate::math;
use crate::mesh::DiskMesh;
use crate::spectral::{BasisIndex, BoundaryFunction, OperatorMatrix, Parity};

/// Relative residual target for the conjugate gradient solver.
pub const CG_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FemError {
    /// The conjugate gradient iteration stalled or met an indefinite
    /// operator; this signals a non-positive conductivity or a degenerate
    /// mesh.
    SolverFailed { rel_residual: f64, iterations: usize },
    /// Requested spectral index 0; the operator acts on the quotient basis.
    ConstantMode,
}

impl core::fmt::Display for FemError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FemError::SolverFailed {
                rel_residual,
                iterations,
            } => write!(
                f,
                "stiffness solve failed: residual {rel_residual:.3e} after {iterations} iterations"
            ),
            FemError::ConstantMode => write!(f, "constant boundary mode has index k = 0"),
        }
    }
}

impl core::error::Error for FemError {}

/// Value at `(x, y)` of the harmonic extension of the boundary eigenfunction
/// `φ_k` to the unit disk.
pub fn harmonic_mode_value(k: usize, x: f64, y: f64) -> f64 {
    let idx = BasisIndex(k);
    let n = idx.mode();
    match idx.parity() {
        Parity::Constant => 1.0 / math::sqrt(math::TAU),
        Parity::Cosine => zpow(x, y, n).0 / math::sqrt(math::PI),
        Parity::Sine => zpow(x, y, n).1 / math::sqrt(math::PI),
    }
}

/// Gradient of the same extension. Uses `d/dz zⁿ = n z^{n−1}`.
pub fn harmonic_mode_gradient(k: usize, x: f64, y: f64) -> (f64, f64) {
    let idx = BasisIndex(k);
    let n = idx.mode();
    if idx.parity() == Parity::Constant || n == 0 {
        return (0.0, 0.0);
    }
    let (re, im) = zpow(x, y, n - 1);
    let scale = n as f64 / math::sqrt(math::PI);
    match idx.parity() {
        Parity::Cosine => (scale * re, -scale * im),
        Parity::Sine => (scale * im, scale * re),
        Parity::Constant => unreachable!(),
    }
}

/// `(Re zⁿ, Im zⁿ)` by repeated multiplication.
fn zpow(x: f64, y: f64, n: usize) -> (f64, f64) {
    let mut re = 1.0;
    let mut im = 0.0;
    for _ in 0..n {
        let nre = re * x - im * y;
        im = re * y + im * x;
        re = nre;
    }
    (re, im)
}

/// Assemble the P1 stiffness matrix `∫ γ ∇φ_i · ∇φ_j`, evaluating `γ` at
/// triangle barycenters (one-point quadrature, exact for element-wise
/// constant coefficients).
pub fn assemble_stiffness(mesh: &DiskMesh, gamma_at: &dyn Fn(f64, f64) -> f64) -> CsrMatrix {
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangles[t];
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let pc = mesh.vertices[c];
        let area2 = mesh.signed_area2(t);
        let area = 0.5 * area2;
        let (bx, by) = mesh.barycenter(t);
        let g = gamma_at(bx, by);
        // Gradients of the barycentric coordinates.
        let grads = [
            [(pb[1] - pc[1]) / area2, (pc[0] - pb[0]) / area2],
            [(pc[1] - pa[1]) / area2, (pa[0] - pc[0]) / area2],
            [(pa[1] - pb[1]) / area2, (pb[0] - pa[0]) / area2],
        ];
        let idx = [a, b, c];
        for i in 0..3 {
            for j in 0..3 {
                let v = g * area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                triplets.push((idx[i], idx[j], v));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), &triplets)
}

/// Discrete weak solution of the Dirichlet problem.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    /// Nodal values at every mesh vertex; boundary nodes carry the imposed
    /// trace.
    pub u: Vec<f64>,
    /// Dirichlet energy `uᵀ A u = ∫ γ |∇u_h|²`.
    pub energy: f64,
    /// Conjugate gradient diagnostics.
    pub cg: CgOutcome,
}

/// Nodal boundary data `f(angle of boundary vertex)`.
pub fn boundary_values(f: &BoundaryFunction, mesh: &DiskMesh) -> Vec<f64> {
    mesh.boundary
        .iter()
        .map(|&v| f.eval(mesh.boundary_angle(v)))
        .collect()
}

/// Interior solve against a pre-assembled stiffness matrix.
///
/// `initial` seeds the CG iteration (pass the harmonic extension when one is
/// available); boundary coordinates of the result carry `bvals` exactly.
pub fn dirichlet_solve_assembled(
    a: &CsrMatrix,
    mesh: &DiskMesh,
    bvals: &[f64],
    initial: Option<&[f64]>,
) -> Result<DirichletSolution, FemError> {
    let n = mesh.n_vertices();
    let interior: Vec<bool> = {
        let mut m = vec![true; n];
        for &v in &mesh.boundary {
            m[v] = false;
        }
        m
    };
    // Lift the boundary data by zero and move it to the right-hand side.
    let mut lift = vec![0.0; n];
    for (i, &v) in mesh.boundary.iter().enumerate() {
        lift[v] = bvals[i];
    }
    let mut rhs = vec![0.0; n];
    a.matvec(&lift, &mut rhs);
    for i in 0..n {
        rhs[i] = if interior[i] { -rhs[i] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    if let Some(init) = initial {
        for i in 0..n {
            if interior[i] {
                x[i] = init[i];
            }
        }
    }
    let out = cg_masked(a, &rhs, &mut x, &interior, CG_REL_TOL, 20 * n + 200);
    if !out.converged {
        return Err(FemError::SolverFailed {
            rel_residual: out.rel_residual,
            iterations: out.iterations,
        });
    }
    let mut u = x;
    for (i, &v) in mesh.boundary.iter().enumerate() {
        u[v] = bvals[i];
    }
    let mut au = vec![0.0; n];
    a.matvec(&u, &mut au);
    let energy = u.iter().zip(&au).map(|(a, b)| a * b).sum();
    Ok(DirichletSolution { u, energy, cg: out })
}

/// Solve the conductivity Dirichlet problem with coefficient given by a
/// closure.
pub fn solve_dirichlet_fn(
    gamma_at: &dyn Fn(f64, f64) -> f64,
    f: &BoundaryFunction,
    mesh: &DiskMesh,
) -> Result<DirichletSolution, FemError> {
    let a = assemble_stiffness(mesh, gamma_at);
    let bvals = boundary_values(f, mesh);
    // Harmonic extension of f as the initial iterate.
    let init: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|p| {
            let mut acc = 0.0;
            for (k, &c) in f.coeffs.iter().enumerate() {
                if c != 0.0 {
                    acc += c * harmonic_mode_value(k, p[0], p[1]);
                }
            }
            acc
        })
        .collect();
    dirichlet_solve_assembled(&a, mesh, &bvals, Some(&init))
}

/// Solve with a grid-sampled conductivity (bilinear interpolation at
/// barycenters).
pub fn solve_dirichlet(
    gamma: &ConductivityField,
    f: &BoundaryFunction,
    mesh: &DiskMesh,
) -> Result<DirichletSolution, FemError> {
    solve_dirichlet_fn(&|x, y| gamma.bilinear(x, y), f, mesh)
}

/// Sum of the discrete Neumann data over the whole boundary: `Σ_{i∈∂}(Au)_i`.
/// Vanishes up to solver tolerance because constants are in the kernel of
/// the stiffness matrix.
pub fn discrete_neumann_sum(a: &CsrMatrix, mesh: &DiskMesh, u: &[f64]) -> f64 {
    let mut au = vec![0.0; mesh.n_vertices()];
    a.matvec(u, &mut au);
    mesh.boundary.iter().map(|&v| au[v]).sum()
}

/// Per-triangle data for the perturbation support: area, barycenter and the
/// coefficient `(γ − 1)` there.
pub(crate) struct SupportTriangle {
    pub t: usize,
    pub area: f64,
    pub bx: f64,
    pub by: f64,
    pub coeff: f64,
}

pub(crate) fn support_triangles(
    mesh: &DiskMesh,
    gamma_at: &dyn Fn(f64, f64) -> f64,
) -> Vec<SupportTriangle> {
    let mut out = Vec::new();
    for t in 0..mesh.n_triangles() {
        let (bx, by) = mesh.barycenter(t);
        let coeff = gamma_at(bx, by) - 1.0;
        if coeff != 0.0 {
            out.push(SupportTriangle {
                t,
                area: mesh.area(t),
                bx,
                by,
                coeff,
            });
        }
    }
    out
}

/// Constant gradient of the P1 interpolant on one triangle.
pub(crate) fn triangle_gradient(mesh: &DiskMesh, t: usize, u: &[f64]) -> (f64, f64) {
    let [a, b, c] = mesh.triangles[t];
    let pa = mesh.vertices[a];
    let pb = mesh.vertices[b];
    let pc = mesh.vertices[c];
    let area2 = mesh.signed_area2(t);
    let gx = (u[a] * (pb[1] - pc[1]) + u[b] * (pc[1] - pa[1]) + u[c] * (pa[1] - pb[1])) / area2;
    let gy = (u[a] * (pc[0] - pb[0]) + u[b] * (pa[0] - pc[0]) + u[c] * (pb[0] - pa[0])) / area2;
    (gx, gy)
}

/// One entry `⟨(Λ_γ − Λ_1) φ_j, φ_k⟩_{L²(∂D)}` through the energy identity.
pub fn dtn_diff_entry_fn(
    gamma_at: &dyn Fn(f64, f64) -> f64,
    j: usize,
    k: usize,
    mesh: &DiskMesh,
) -> Result<f64, FemError> {
    if j == 0 || k == 0 {
        return Err(FemError::ConstantMode);
    }
    let m = assemble_dtn_matrix_fn(gamma_at, j, k, 0.0, mesh)?;
    Ok(m.get(j, k))
}

/// Same entry for a grid-sampled conductivity.
pub fn dtn_diff_entry(
    gamma: &ConductivityField,
    j: usize,
    k: usize,
    mesh: &DiskMesh,
) -> Result<f64, FemError> {
    dtn_diff_entry_fn(&|x, y| gamma.bilinear(x, y), j, k, mesh)
}

/// Assemble the coefficient matrix of `Λ̃_γ` on the `(j_max, k_max)` window
/// at heteroscedasticity index `r`.
///
/// One interior solve per column `j`; the `γ = 1` reference solutions are
/// contracted analytically on the perturbation support.
pub fn assemble_dtn_matrix_fn(
    gamma_at: &dyn Fn(f64, f64) -> f64,
    j_max: usize,
    k_max: usize,
    r: f64,
    mesh: &DiskMesh,
) -> Result<OperatorMatrix, FemError> {
    let a = assemble_stiffness(mesh, gamma_at);
    let supp = support_triangles(mesh, gamma_at);
    let mut out = OperatorMatrix::zeros(j_max, k_max, 0.0);
    if supp.is_empty() {
        return Ok(out.rescale_index(r));
    }
    // Reference gradients ∇u_{1,φ_k} at support barycenters, fused with the
    // quadrature weight (γ−1)·area.
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
        // Solution gradients per support triangle, shared across k.
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
    Ok(out.rescale_index(r))
}

/// Assemble for a grid-sampled conductivity.
pub fn assemble_dtn_matrix(
    gamma: &ConductivityField,
    j_max: usize,
    k_max: usize,
    r: f64,
    mesh: &DiskMesh,
) -> Result<OperatorMatrix, FemError> {
    assemble_dtn_matrix_fn(&|x, y| gamma.bilinear(x, y), j_max, k_max, r, mesh)
}

/// Dirichlet-to-Neumann eigenvalue of the concentric two-phase disk:
/// conductivity `κ` inside radius `ρ`, one outside, boundary mode `n`.
///
/// Separation of variables gives `n (1 − μ ρ^{2n}) / (1 + μ ρ^{2n})` with
/// `μ = (1 − κ)/(1 + κ)`; the closed form validates the assembled solver.
pub fn analytic_dtn_concentric(kappa: f64, rho: f64, n: usize) -> f64 {
    let mu = (1.0 - kappa) / (1.0 + kappa);
    let s = mu * math::powi(rho, 2 * n as i32);
    n as f64 * (1.0 - s) / (1.0 + s)
}

/// Exact piecewise conductivity of the concentric-disk problem.
pub fn concentric_gamma(kappa: f64, rho: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| {
        if x * x + y * y < rho * rho {
            kappa
        } else {
            1.0
        }
    }
}
