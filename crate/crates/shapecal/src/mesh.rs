//! Triangulated closed surfaces: construction, validation, measurement,
//! and transport under ambient velocity fields.
//!
//! A [`TriMesh`] stores plain vertex positions and triangle index triples.
//! Validation enforces what the rest of the crate assumes: every triangle
//! non-degenerate, every edge shared by exactly two triangles with opposite
//! orientation (a closed, consistently oriented 2-manifold). Orientation is
//! outward when the enclosed volume — computed exactly by the divergence
//! theorem — is positive.
//!
//! The icosphere builder provides the refinement family used by the Newton
//! experiments; `radial_jitter` perturbs it deterministically for
//! convergence studies away from exact symmetry.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::field::VectorField;
use crate::flow::flow_point;
use crate::tensor::Vector;
use crate::{Error, Result};

/// Relative area floor below which a triangle counts as degenerate.
const DEGENERATE_AREA_FACTOR: f64 = 1e-14;

/// A triangle mesh: vertex positions plus index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector<3>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Build and validate.
    pub fn new(vertices: Vec<Vector<3>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Characteristic length: the diagonal of the bounding box.
    pub fn scale(&self) -> f64 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for i in 0..3 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        let mut d = 0.0;
        for i in 0..3 {
            d += (hi[i] - lo[i]).powi(2);
        }
        d.sqrt()
    }

    /// Check index ranges, triangle areas, and closed oriented
    /// manifoldness (every directed edge used exactly once, every
    /// undirected edge by exactly two triangles in opposite directions).
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for tri in &self.triangles {
            for &i in tri {
                if i >= nv {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        vertices: nv,
                    });
                }
            }
        }
        let scale = self.scale().max(f64::MIN_POSITIVE);
        for (index, _) in self.triangles.iter().enumerate() {
            let area = self.triangle_area(index);
            if !(area > DEGENERATE_AREA_FACTOR * scale * scale) {
                return Err(Error::DegenerateTriangle { index, area });
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if e.0 == e.1 {
                    return Err(Error::NotClosedManifold {
                        detail: format!("triangle {tri:?} repeats vertex {}", e.0),
                    });
                }
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(Error::NotClosedManifold {
                    detail: format!("directed edge ({a},{b}) used {count} times"),
                });
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Err(Error::NotClosedManifold {
                    detail: format!("edge ({a},{b}) has no opposite-orientation partner"),
                });
            }
        }
        Ok(())
    }

    pub fn triangle_corners(&self, index: usize) -> [Vector<3>; 3] {
        let [a, b, c] = self.triangles[index];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized normal `(p1-p0) x (p2-p0)`; its length is twice the area.
    pub fn triangle_cross(&self, index: usize) -> Vector<3> {
        let [p0, p1, p2] = self.triangle_corners(index);
        (p1 - p0).cross(&(p2 - p0))
    }

    pub fn triangle_area(&self, index: usize) -> f64 {
        0.5 * self.triangle_cross(index).norm()
    }

    pub fn triangle_normal(&self, index: usize) -> Vector<3> {
        self.triangle_cross(index).normalized()
    }

    pub fn triangle_centroid(&self, index: usize) -> Vector<3> {
        let [p0, p1, p2] = self.triangle_corners(index);
        (p0 + p1 + p2) / 3.0
    }

    /// Per-vertex unit normals, area-weighted over incident triangles.
    pub fn vertex_normals(&self) -> Vec<Vector<3>> {
        let mut sums = vec![Vector::zero(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            // The unnormalized cross is 2*area*normal, so plain summation
            // is exactly the area-weighted average.
            let cross = self.triangle_cross(t);
            for &i in tri {
                sums[i] += cross;
            }
        }
        sums.into_iter().map(|s| s.normalized()).collect()
    }

    /// Lumped vertex areas: one third of each incident triangle.
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let share = self.triangle_area(t) / 3.0;
            for &i in tri {
                areas[i] += share;
            }
        }
        areas
    }

    pub fn area(&self) -> f64 {
        let parts: Vec<f64> = (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .collect();
        crate::quadrature::stable_sum(&parts)
    }

    /// Enclosed volume by the divergence theorem, `(1/3) sum x_c . n a`.
    /// Exact for polyhedra; negative if the orientation points inward.
    pub fn volume(&self) -> f64 {
        let parts: Vec<f64> = (0..self.triangles.len())
            .map(|t| self.triangle_centroid(t).dot(&self.triangle_cross(t)) / 6.0)
            .collect();
        crate::quadrature::stable_sum(&parts)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Unit icosphere: icosahedron refined by `subdivisions` rounds of
    /// edge-midpoint splitting, with every vertex projected to the unit
    /// sphere. Outward oriented.
    pub fn icosphere(subdivisions: usize) -> Self {
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let mut vertices: Vec<Vector<3>> =
            raw.iter().map(|v| Vector::new(*v).normalized()).collect();
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for [a, b, c] in triangles {
                let mut mid = |i: usize, j: usize, vertices: &mut Vec<Vector<3>>| {
                    let key = (i.min(j), i.max(j));
                    *midpoints.entry(key).or_insert_with(|| {
                        let m = ((vertices[i] + vertices[j]) * 0.5).normalized();
                        vertices.push(m);
                        vertices.len() - 1
                    })
                };
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.push([a, ab, ca]);
                next.push([ab, b, bc]);
                next.push([ca, bc, c]);
                next.push([ab, bc, ca]);
            }
            triangles = next;
        }
        TriMesh {
            vertices,
            triangles,
        }
    }

    /// Structured torus triangulation: a `major_segments x minor_segments`
    /// grid over the standard angles, each quad split into two triangles,
    /// outward oriented. The tube circles the z-axis.
    pub fn torus_grid(
        major_radius: f64,
        minor_radius: f64,
        major_segments: usize,
        minor_segments: usize,
    ) -> Self {
        let (nu, nv) = (major_segments.max(3), minor_segments.max(3));
        let mut vertices = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
            for j in 0..nv {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
                let ring = major_radius + minor_radius * phi.cos();
                vertices.push(Vector::new([
                    ring * theta.cos(),
                    ring * theta.sin(),
                    minor_radius * phi.sin(),
                ]));
            }
        }
        let at = |i: usize, j: usize| (i % nu) * nv + (j % nv);
        let mut triangles = Vec::with_capacity(2 * nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let (a, b) = (at(i, j), at(i + 1, j));
                let (c, d) = (at(i + 1, j + 1), at(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        TriMesh {
            vertices,
            triangles,
        }
    }

    /// Multiply each vertex radius by `1 + amplitude * xi_i` with `xi_i`
    /// uniform in `[-1, 1]`, deterministically from the seed.
    pub fn radial_jitter(&self, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vertices = self
            .vertices
            .iter()
            .map(|v| *v * (1.0 + amplitude * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect();
        TriMesh {
            vertices,
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TriMesh {
            vertices: self.vertices.iter().map(|v| *v * factor).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn translated(&self, shift: Vector<3>) -> Self {
        TriMesh {
            vertices: self.vertices.iter().map(|v| *v + shift).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// A transported mesh plus the count of triangles whose normal flipped
/// against the transported vertex normals (a warning sign of an inverted
/// or self-intersecting flow, not an error).
#[derive(Debug, Clone)]
pub struct FlowedMesh {
    pub mesh: TriMesh,
    pub flipped_triangles: usize,
}

/// Transport every vertex along `dx/dt = V(x)`; connectivity is unchanged.
pub fn flow_mesh(
    mesh: &TriMesh,
    field: &VectorField<3>,
    t: f64,
    steps: usize,
) -> Result<FlowedMesh> {
    let vertices: Vec<Vector<3>> = mesh
        .vertices
        .par_iter()
        .map(|v| flow_point(field, v, t, steps))
        .collect();
    for (i, v) in vertices.iter().enumerate() {
        if !v.0.iter().all(|c| c.is_finite()) {
            return Err(Error::SolverDiverged {
                iterations: steps,
                residual: mesh.vertices[i].norm(),
            });
        }
    }
    let moved = TriMesh {
        vertices,
        triangles: mesh.triangles.clone(),
    };
    let normals = moved.vertex_normals();
    let flipped = (0..moved.triangles.len())
        .filter(|&t| {
            let tri = moved.triangles[t];
            let avg = normals[tri[0]] + normals[tri[1]] + normals[tri[2]];
            moved.triangle_cross(t).dot(&avg) <= 0.0
        })
        .count();
    Ok(FlowedMesh {
        mesh: moved,
        flipped_triangles: flipped,
    })
}
