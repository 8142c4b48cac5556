//! Piecewise-linear surface finite elements on triangle meshes.
//!
//! This module provides the discrete counterpart of the smooth calculus:
//!
//! * [`Csr`], a compressed sparse row matrix with deterministic assembly
//!   (stable triplet ordering, fixed summation order) and a parallel
//!   matrix-vector product whose result is independent of thread count;
//! * [`conjugate_gradient`], a Jacobi-preconditioned CG solver that reports
//!   indefiniteness instead of silently stagnating;
//! * [`FemSpace`], the per-triangle and per-vertex geometry of a mesh:
//!   hat-function surface gradients, lumped vertex areas, a recovered
//!   shape operator, and the curvature invariants derived from it;
//! * gradient and hessian recovery (piecewise gradients averaged back to
//!   vertices, then differentiated again) used by the curvature-flow
//!   assembly;
//! * mesh evaluation of the surface functionals.
//!
//! The recovered shape operator of a triangle is `P sym(Σ_i n_i ⊗ g_i) P`,
//! where `n_i` are the (angle-free, area-induced) vertex normals, `g_i` the
//! hat-function gradients, and `P` the in-plane projector. Vertex values are
//! area-weighted averages of incident triangles, re-projected onto the
//! vertex tangent plane. An analytic source can replace the recovered
//! curvature on meshes sampled from a known level set.

use rayon::prelude::*;

use crate::functionals::FunctionalKind;
use crate::invariants::InvariantBundle;
use crate::levelset::LevelSet;
use crate::mesh::TriMesh;
use crate::quadrature::{stable_dot, stable_sum};
use crate::tensor::{outer, Tensor, Vector};
use crate::{Error, Result};

/// Compressed sparse row matrix.
///
/// Assembly sorts triplets stably by `(row, column)` and sums duplicates in
/// their original relative order, so a matrix built from a deterministic
/// triplet stream is bit-reproducible. The matrix-vector product parallelizes
/// over rows; each row is summed sequentially in storage order, so products
/// are independent of the thread count.
#[derive(Debug, Clone)]
pub struct Csr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds a matrix from `(row, column, value)` triplets, summing
    /// duplicate positions.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        // Stable sort: duplicate entries keep their emission order, so the
        // duplicate summation below is deterministic.
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut counts = vec![0usize; rows];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *values.last_mut().expect("non-empty values") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for r in 0..rows {
            row_ptr[r + 1] = row_ptr[r] + counts[r];
        }
        Csr {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// The stored entries of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    /// The stored entries as `(row, column, value)` triplets in row-major
    /// order.
    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    /// Matrix-vector product `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in matvec");
        (0..self.rows)
            .into_par_iter()
            .map(|r| {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[self.col_idx[k]];
                }
                acc
            })
            .collect()
    }

    /// The main diagonal (zero where no entry is stored).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows.min(self.cols)];
        for r in 0..d.len() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }

    /// Sum of the diagonal entries.
    pub fn trace(&self) -> f64 {
        stable_sum(&self.diagonal())
    }

    /// The transposed matrix.
    pub fn transpose(&self) -> Csr {
        let triplets = self
            .to_triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v))
            .collect();
        Csr::from_triplets(self.cols, self.rows, triplets)
    }

    /// Entry-wise combination `ca * a + cb * b`.
    pub fn linear_combination(ca: f64, a: &Csr, cb: f64, b: &Csr) -> Csr {
        assert_eq!((a.rows, a.cols), (b.rows, b.cols), "shape mismatch");
        let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
        triplets.extend(a.to_triplets().into_iter().map(|(r, c, v)| (r, c, ca * v)));
        triplets.extend(b.to_triplets().into_iter().map(|(r, c, v)| (r, c, cb * v)));
        Csr::from_triplets(a.rows, a.cols, triplets)
    }

    /// The symmetric part `(A + A^T)/2` together with the Frobenius norm of
    /// the discarded skew part `(A - A^T)/2`.
    pub fn symmetric_part(&self) -> (Csr, f64) {
        assert_eq!(self.rows, self.cols, "symmetric part needs a square matrix");
        let transpose = self.transpose();
        let sym = Csr::linear_combination(0.5, self, 0.5, &transpose);
        let skew = Csr::linear_combination(0.5, self, -0.5, &transpose);
        let squares: Vec<f64> = skew.values.iter().map(|v| v * v).collect();
        let skew_norm = stable_sum(&squares).sqrt();
        (sym, skew_norm)
    }

    /// Adds `d[i]` to each diagonal entry.
    pub fn add_diagonal(&self, d: &[f64]) -> Csr {
        assert_eq!(self.rows, self.cols, "diagonal shift needs a square matrix");
        assert_eq!(d.len(), self.rows, "diagonal length mismatch");
        let mut triplets = self.to_triplets();
        triplets.extend((0..self.rows).map(|i| (i, i, d[i])));
        Csr::from_triplets(self.rows, self.cols, triplets)
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    /// The approximate solution.
    pub solution: Vec<f64>,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Final unpreconditioned residual norm `|b - A x|`.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// systems.
///
/// Stops when the residual drops below `rel_tol * |b|`; fails with
/// [`Error::IndefiniteOperator`] when a search direction has non-positive
/// curvature and with [`Error::SolverDiverged`] after `10 * n` iterations.
/// All inner products use compensated blocked summation in index order, so
/// the iteration is bit-reproducible across thread counts.
pub fn conjugate_gradient(a: &Csr, rhs: &[f64], rel_tol: f64) -> Result<CgOutcome> {
    let n = rhs.len();
    assert_eq!(a.rows(), n, "system size mismatch");
    let max_iterations = 10 * n.max(1);
    let rhs_norm = stable_dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let diag = a.diagonal();
    let precondition = |r: &[f64]| -> Vec<f64> {
        r.iter()
            .zip(&diag)
            .map(|(ri, &di)| if di.abs() > 0.0 { ri / di.abs() } else { *ri })
            .collect()
    };

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = stable_dot(&r, &z);
    let mut residual = rhs_norm;

    for iter in 1..=max_iterations {
        let q = a.matvec(&p);
        let pq = stable_dot(&p, &q);
        if !pq.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: iter,
                residual: pq,
            });
        }
        if pq <= 0.0 {
            return Err(Error::IndefiniteOperator { curvature: pq });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        residual = stable_dot(&r, &r).sqrt();
        if !residual.is_finite() {
            return Err(Error::SolverDiverged {
                iterations: iter,
                residual,
            });
        }
        if residual <= rel_tol * rhs_norm {
            return Ok(CgOutcome {
                solution: x,
                iterations: iter,
                residual,
            });
        }
        z = precondition(&r);
        let rz_next = stable_dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged {
        iterations: max_iterations,
        residual,
    })
}

/// Where the curvature fields entering assembly come from.
#[derive(Clone)]
pub enum CurvatureSource {
    /// Recover the shape operator from the mesh itself.
    Recovered,
    /// Evaluate the extended shape operator of a level set. Only meaningful
    /// for meshes sampled from (a small perturbation of) that surface.
    Analytic(LevelSet<3>),
}

/// Per-triangle geometry and curvature data.
#[derive(Debug, Clone, Copy)]
pub struct TriangleData {
    /// Triangle area.
    pub area: f64,
    /// Unit normal (consistent with the mesh orientation).
    pub normal: Vector<3>,
    /// Surface gradients of the three hat functions, in corner order.
    pub gradients: [Vector<3>; 3],
    /// Shape operator attributed to the triangle.
    pub shape: Tensor<3>,
}

/// The piecewise-linear finite element space over a closed triangle mesh,
/// with precomputed geometry and curvature.
pub struct FemSpace {
    /// The underlying mesh.
    pub mesh: TriMesh,
    /// Per-triangle data, in triangle order.
    pub triangles: Vec<TriangleData>,
    /// Unit vertex normals (area-induced averages of incident face normals).
    pub vertex_normals: Vec<Vector<3>>,
    /// Lumped vertex areas (one third of each incident triangle).
    pub vertex_areas: Vec<f64>,
    /// Indices of the triangles incident to each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
    /// Vertex shape operators.
    pub vertex_shape: Vec<Tensor<3>>,
    /// Total mean curvature `tr S` per vertex.
    pub kappa: Vec<f64>,
    /// Second trace power `tr S^2` per vertex.
    pub second_trace: Vec<f64>,
    /// Third trace power `tr S^3` per vertex.
    pub third_trace: Vec<f64>,
    /// Gauss curvature per vertex.
    pub gauss: Vec<f64>,
}

impl FemSpace {
    /// Precomputes geometry and curvature for `mesh`.
    pub fn build(mesh: TriMesh, source: &CurvatureSource) -> Result<FemSpace> {
        let vertex_normals = mesh.vertex_normals();
        let vertex_areas = mesh.vertex_areas();
        let nv = mesh.vertices.len();
        let mut vertex_triangles = vec![Vec::new(); nv];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }

        let mut triangles = Vec::with_capacity(mesh.triangles.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let [p0, p1, p2] = mesh.triangle_corners(t);
            let cross = mesh.triangle_cross(t);
            let doubled = cross.norm();
            let area = 0.5 * doubled;
            if !(area.is_finite() && area > 0.0) {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
            let normal = cross / doubled;
            // Hat gradient of corner i: rotate the opposite edge into the
            // triangle plane and scale by twice the area.
            let edges = [p2 - p1, p0 - p2, p1 - p0];
            let gradients = [
                normal.cross(&edges[0]) / doubled,
                normal.cross(&edges[1]) / doubled,
                normal.cross(&edges[2]) / doubled,
            ];
            let shape = match source {
                CurvatureSource::Recovered => {
                    let projector = Tensor::projector(&normal);
                    let mut jac = Tensor::default();
                    for (i, &v) in tri.iter().enumerate() {
                        jac = jac + outer(&vertex_normals[v], &gradients[i]);
                    }
                    projector
                        .compose(&jac.symmetric_part())
                        .compose(&projector)
                }
                CurvatureSource::Analytic(ls) => {
                    let centroid = mesh.triangle_centroid(t);
                    ls.shape_operator_at(&centroid)?
                }
            };
            triangles.push(TriangleData {
                area,
                normal,
                gradients,
                shape,
            });
        }

        let vertex_shape: Vec<Tensor<3>> = match source {
            CurvatureSource::Recovered => {
                let mut acc = vec![Tensor::<3>::default(); nv];
                let mut weight = vec![0.0; nv];
                for (t, tri) in mesh.triangles.iter().enumerate() {
                    let data = &triangles[t];
                    for &v in tri {
                        acc[v] = acc[v] + data.shape * data.area;
                        weight[v] += data.area;
                    }
                }
                (0..nv)
                    .map(|v| {
                        let projector = Tensor::projector(&vertex_normals[v]);
                        projector
                            .compose(&(acc[v] / weight[v]))
                            .compose(&projector)
                            .symmetric_part()
                    })
                    .collect()
            }
            CurvatureSource::Analytic(ls) => mesh
                .vertices
                .iter()
                .map(|x| ls.shape_operator_at(x))
                .collect::<Result<Vec<_>>>()?,
        };

        let mut kappa = Vec::with_capacity(nv);
        let mut second_trace = Vec::with_capacity(nv);
        let mut third_trace = Vec::with_capacity(nv);
        let mut gauss = Vec::with_capacity(nv);
        for s in &vertex_shape {
            let bundle = InvariantBundle::from_shape_operator(s)?;
            kappa.push(bundle.traces[0]);
            second_trace.push(bundle.traces[1]);
            third_trace.push(bundle.traces[2]);
            gauss.push(bundle.elementary[1]);
        }

        Ok(FemSpace {
            mesh,
            triangles,
            vertex_normals,
            vertex_areas,
            vertex_triangles,
            vertex_shape,
            kappa,
            second_trace,
            third_trace,
            gauss,
        })
    }

    /// Number of degrees of freedom (vertices).
    pub fn dof(&self) -> usize {
        self.mesh.vertices.len()
    }

    /// Average of a vertex field over the corners of triangle `t`.
    pub fn triangle_average(&self, vertex_values: &[f64], t: usize) -> f64 {
        let [a, b, c] = self.mesh.triangles[t];
        (vertex_values[a] + vertex_values[b] + vertex_values[c]) / 3.0
    }

    /// Assembles matrix triplets in parallel over triangles, then merges
    /// them in triangle order so the result is thread-count independent.
    fn assemble<F>(&self, local: F) -> Csr
    where
        F: Fn(usize, &TriangleData, &[usize; 3]) -> Vec<(usize, usize, f64)> + Sync,
    {
        let per_triangle: Vec<Vec<(usize, usize, f64)>> = self
            .mesh
            .triangles
            .par_iter()
            .enumerate()
            .map(|(t, tri)| local(t, &self.triangles[t], tri))
            .collect();
        let triplets: Vec<(usize, usize, f64)> = per_triangle.into_iter().flatten().collect();
        Csr::from_triplets(self.dof(), self.dof(), triplets)
    }

    /// The mass matrix `∫ w φ_i φ_j`, with the optional vertex weight `w`
    /// treated as constant on each triangle (corner average).
    pub fn mass_matrix(&self, weights: Option<&[f64]>) -> Csr {
        self.assemble(|t, data, tri| {
            let w = weights.map_or(1.0, |w| self.triangle_average(w, t));
            let scale = w * data.area / 12.0;
            let mut out = Vec::with_capacity(9);
            for (i, &vi) in tri.iter().enumerate() {
                for (j, &vj) in tri.iter().enumerate() {
                    let entry = if i == j { 2.0 * scale } else { scale };
                    out.push((vi, vj, entry));
                }
            }
            out
        })
    }

    /// The stiffness matrix `∫ w ∇_Γ φ_i · ∇_Γ φ_j`, with the optional
    /// vertex weight treated as constant on each triangle.
    pub fn stiffness_matrix(&self, weights: Option<&[f64]>) -> Csr {
        self.assemble(|t, data, tri| {
            let w = weights.map_or(1.0, |w| self.triangle_average(w, t));
            let mut out = Vec::with_capacity(9);
            for (i, &vi) in tri.iter().enumerate() {
                for (j, &vj) in tri.iter().enumerate() {
                    let entry = w * data.area * data.gradients[i].dot(&data.gradients[j]);
                    out.push((vi, vj, entry));
                }
            }
            out
        })
    }

    /// Piecewise-constant surface gradient of a vertex field.
    pub fn triangle_gradients(&self, u: &[f64]) -> Vec<Vector<3>> {
        self.mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let data = &self.triangles[t];
                let mut g = Vector::<3>::default();
                for (i, &v) in tri.iter().enumerate() {
                    g = g + data.gradients[i] * u[v];
                }
                g
            })
            .collect()
    }

    /// Area-weighted average of a per-triangle vector field back to
    /// vertices (lumped L² projection).
    pub fn vertex_average_vectors(&self, per_triangle: &[Vector<3>]) -> Vec<Vector<3>> {
        let nv = self.dof();
        let mut acc = vec![Vector::<3>::default(); nv];
        let mut weight = vec![0.0; nv];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let a = self.triangles[t].area;
            for &v in tri {
                acc[v] = acc[v] + per_triangle[t] * a;
                weight[v] += a;
            }
        }
        (0..nv).map(|v| acc[v] / weight[v]).collect()
    }

    /// Piecewise-constant surface jacobian `Σ_i w_i ⊗ g_i` of a vertex
    /// vector field.
    pub fn triangle_jacobians(&self, per_vertex: &[Vector<3>]) -> Vec<Tensor<3>> {
        self.mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let data = &self.triangles[t];
                let mut jac = Tensor::<3>::default();
                for (i, &v) in tri.iter().enumerate() {
                    jac = jac + outer(&per_vertex[v], &data.gradients[i]);
                }
                jac
            })
            .collect()
    }

    /// Recovered second surface derivative of a vertex field: the gradient
    /// is averaged to vertices, then differentiated once more per triangle.
    pub fn recovered_hessians(&self, u: &[f64]) -> Vec<Tensor<3>> {
        let vertex_gradients = self.vertex_average_vectors(&self.triangle_gradients(u));
        self.triangle_jacobians(&vertex_gradients)
    }

    /// Lumped weak Laplace–Beltrami of a vertex field:
    /// `(Δ u)_i = -(K u)_i / a_i` with `K` the stiffness matrix and `a_i`
    /// the lumped vertex area.
    pub fn weak_laplacian(&self, stiffness: &Csr, u: &[f64]) -> Vec<f64> {
        stiffness
            .matvec(u)
            .into_iter()
            .zip(&self.vertex_areas)
            .map(|(ku, &a)| -ku / a)
            .collect()
    }

    /// Piecewise-constant surface gradient of the vertex mean curvature.
    pub fn curvature_gradients(&self) -> Vec<Vector<3>> {
        self.triangle_gradients(&self.kappa)
    }

    /// Mean curvature averaged onto each triangle.
    pub fn triangle_kappa(&self) -> Vec<f64> {
        (0..self.mesh.triangles.len())
            .map(|t| self.triangle_average(&self.kappa, t))
            .collect()
    }

    /// Evaluates a surface functional on the mesh: per-triangle densities
    /// from corner-averaged curvature, weighted by triangle area.
    pub fn functional_value(&self, kind: &FunctionalKind) -> f64 {
        let contributions: Vec<f64> = (0..self.mesh.triangles.len())
            .map(|t| {
                let kappa = self.triangle_average(&self.kappa, t);
                let gauss = self.triangle_average(&self.gauss, t);
                self.triangles[t].area * kind.density(kappa, gauss)
            })
            .collect();
        stable_sum(&contributions)
    }

    /// Enclosed volume of the mesh.
    pub fn volume(&self) -> f64 {
        self.mesh.volume()
    }

    /// Total mesh area.
    pub fn area(&self) -> f64 {
        self.mesh.area()
    }
}
