//! Concentric-ring triangulations of the unit disk.
//!
//! Ring `i` of `R` carries `6i` vertices at radius `i/R`, which yields a
//! quasi-uniform mesh of near-equilateral triangles whose outermost vertices
//! sit exactly on the circle. The ring count is forced even so the radius
//! `1/2` is itself a mesh circle: piecewise-constant radial conductivities
//! with an interface there are then resolved exactly by barycenter
//! quadrature.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshError {
    /// Target edge length must lie in `(0, 0.5)`.
    BadEdgeLength(f64),
    /// A generated triangle failed the degeneracy floor.
    DegenerateTriangle { index: usize, area: f64 },
}

impl core::fmt::Display for MeshError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MeshError::BadEdgeLength(h) => write!(f, "edge length {h} outside (0, 0.5)"),
            MeshError::DegenerateTriangle { index, area } => {
                write!(f, "triangle {index} degenerate with area {area}")
            }
        }
    }
}

impl core::error::Error for MeshError {}

/// Triangulation of the unit disk.
#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary vertex indices ordered by increasing angle from 0.
    pub boundary: Vec<usize>,
    /// Target edge length the mesh was built for.
    pub h: f64,
}

impl DiskMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed twice-area of a triangle (positive for counterclockwise).
    pub fn signed_area2(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.signed_area2(t)
    }

    pub fn barycenter(&self, t: usize) -> (f64, f64) {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        (
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        )
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Angle of a boundary vertex.
    pub fn boundary_angle(&self, v: usize) -> f64 {
        let p = self.vertices[v];
        let a = math::atan2(p[1], p[0]);
        if a < 0.0 {
            a + math::TAU
        } else {
            a
        }
    }

    pub fn is_boundary(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n_vertices()];
        for &v in &self.boundary {
            flags[v] = true;
        }
        flags
    }
}

/// Build the ring mesh for target edge length `h`.
pub fn build_mesh(h: f64) -> Result<DiskMesh, MeshError> {
    if !(h > 0.0 && h < 0.5) {
        return Err(MeshError::BadEdgeLength(h));
    }
    let mut rings = math::round(1.0 / h) as usize;
    rings = rings.max(2);
    if rings % 2 == 1 {
        rings += 1;
    }

    let mut vertices: Vec<[f64; 2]> = Vec::with_capacity(1 + 3 * rings * (rings + 1));
    vertices.push([0.0, 0.0]);
    let mut ring_start = vec![0usize; rings + 1];
    for i in 1..=rings {
        ring_start[i] = vertices.len();
        let count = 6 * i;
        let radius = i as f64 / rings as f64;
        for m in 0..count {
            let angle = math::TAU * m as f64 / count as f64;
            let (s, c) = math::sin_cos(angle);
            vertices.push([radius * c, radius * s]);
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(6 * rings * rings);
    // Center fan.
    for m in 0..6usize {
        triangles.push([0, ring_start[1] + m, ring_start[1] + (m + 1) % 6]);
    }
    // Annuli: merge-walk the two rings by angle.
    for i in 2..=rings {
        let n_in = 6 * (i - 1);
        let n_out = 6 * i;
        let start_in = ring_start[i - 1];
        let start_out = ring_start[i];
        let mut ai = 0usize; // inner edges consumed
        let mut bi = 0usize; // outer edges consumed
        while ai < n_in || bi < n_out {
            let next_in = (ai + 1) as f64 / n_in as f64;
            let next_out = (bi + 1) as f64 / n_out as f64;
            if bi < n_out && (ai == n_in || next_out <= next_in) {
                // Advance along the outer ring.
                triangles.push([
                    start_out + bi % n_out,
                    start_out + (bi + 1) % n_out,
                    start_in + ai % n_in,
                ]);
                bi += 1;
            } else {
                // Advance along the inner ring.
                triangles.push([
                    start_in + ai % n_in,
                    start_out + bi % n_out,
                    start_in + (ai + 1) % n_in,
                ]);
                ai += 1;
            }
        }
    }

    let boundary: Vec<usize> = (ring_start[rings]..vertices.len()).collect();
    let mesh = DiskMesh {
        vertices,
        triangles,
        boundary,
        h,
    };

    // Orientation and degeneracy checks.
    let floor = h * h / 100.0;
    let mut oriented = mesh;
    for t in 0..oriented.n_triangles() {
        if oriented.signed_area2(t) < 0.0 {
            oriented.triangles[t].swap(1, 2);
        }
        let area = oriented.area(t);
        if area <= floor {
            return Err(MeshError::DegenerateTriangle { index: t, area });
        }
    }
    Ok(oriented)
}
