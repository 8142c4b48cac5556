//! Implicit surfaces: the zero set of a smooth function `phi`.
//!
//! The surface is `{x : phi(x) = 0}` with `phi < 0` inside, so the outward
//! unit normal is `grad phi / |grad phi|`. All pointwise geometry — normals,
//! tangential projectors, the Weingarten map `P (D^2 phi) P / |grad phi|` —
//! derives from derivatives of `phi`. Built-in level sets (circle, sphere,
//! ellipsoid, torus) carry exact derivatives up to third order, which is what
//! the second tangential derivatives of the normal field require.

use std::sync::Arc;

use crate::field::{ScalarField, ScalarJet, TensorField, TensorJet, VectorField, VectorJet};
use crate::tensor::{outer, Tensor, Vector};
use crate::{Error, Result};

/// Gradient magnitudes below this are treated as degenerate: no normal
/// direction can be extracted.
pub const DEGENERATE_GRADIENT: f64 = 1e-12;

/// Convergence threshold for [`LevelSet::project_to_surface`], relative to
/// the level-set magnitude scale.
pub const PROJECTION_TOL: f64 = 1e-12;

/// Maximum projection iterations.
pub const PROJECTION_MAX_ITER: usize = 50;

type ThirdEval<const N: usize> = dyn Fn(&Vector<N>) -> [Tensor<N>; N] + Send + Sync;

/// A smooth level-set description of a closed hypersurface.
#[derive(Clone)]
pub struct LevelSet<const N: usize = 3> {
    field: ScalarField<N>,
    /// `third(x)[k]` is the entrywise partial of the hessian in direction `k`.
    third: Option<Arc<ThirdEval<N>>>,
    /// Characteristic geometric length (used to scale steps and tolerances).
    scale: f64,
    /// Characteristic magnitude of `phi` near the surface
    /// (`|grad phi| * scale` at a reference surface point).
    phi_scale: f64,
    /// Axis-aligned bounding box of the surface.
    bbox_min: Vector<N>,
    bbox_max: Vector<N>,
    /// Radius of the tube around the surface in which projection is reliable.
    tube_radius: f64,
}

impl<const N: usize> LevelSet<N> {
    /// Assemble a level set from its scalar field (which must carry
    /// hessians), optional third derivatives, and geometric metadata.
    /// `reference` must be a point on the surface; it calibrates the
    /// magnitude scale of `phi`.
    pub fn new(
        field: ScalarField<N>,
        third: Option<Arc<ThirdEval<N>>>,
        scale: f64,
        reference: &Vector<N>,
        bbox_min: Vector<N>,
        bbox_max: Vector<N>,
        tube_radius: f64,
    ) -> Self {
        let grad_ref = field.gradient(reference).norm();
        LevelSet {
            field,
            third,
            scale,
            phi_scale: (grad_ref * scale).max(f64::MIN_POSITIVE),
            bbox_min,
            bbox_max,
            tube_radius,
        }
    }

    pub fn phi(&self, x: &Vector<N>) -> f64 {
        self.field.value(x)
    }

    pub fn grad_phi(&self, x: &Vector<N>) -> Vector<N> {
        self.field.gradient(x)
    }

    pub fn hess_phi(&self, x: &Vector<N>) -> Result<Tensor<N>> {
        self.field.jet(x).hessian("level-set hessian")
    }

    /// The level-set function as a scalar field (with derivatives).
    pub fn phi_field(&self) -> &ScalarField<N> {
        &self.field
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn phi_scale(&self) -> f64 {
        self.phi_scale
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn bounding_box(&self) -> (Vector<N>, Vector<N>) {
        (self.bbox_min, self.bbox_max)
    }

    pub fn has_third_derivatives(&self) -> bool {
        self.third.is_some()
    }

    /// Outward unit normal `grad phi / |grad phi|` (defined off the surface
    /// as well: the normal of the level set through `x`).
    pub fn normal_at(&self, x: &Vector<N>) -> Result<Vector<N>> {
        let g = self.grad_phi(x);
        let m = g.norm();
        if m < DEGENERATE_GRADIENT {
            return Err(Error::DegenerateGradient {
                point: x.0.to_vec(),
                norm: m,
            });
        }
        Ok(g / m)
    }

    /// Tangential projector `P = I - n ⊗ n`.
    pub fn projector_at(&self, x: &Vector<N>) -> Result<Tensor<N>> {
        Ok(Tensor::projector(&self.normal_at(x)?))
    }

    /// Weingarten map (tangential jacobian of the unit normal):
    /// `P (D^2 phi) P / |grad phi|`. Symmetric, annihilates the normal.
    pub fn shape_operator_at(&self, x: &Vector<N>) -> Result<Tensor<N>> {
        let g = self.grad_phi(x);
        let m = g.norm();
        if m < DEGENERATE_GRADIENT {
            return Err(Error::DegenerateGradient {
                point: x.0.to_vec(),
                norm: m,
            });
        }
        let p = Tensor::projector(&(g / m));
        let h = self.hess_phi(x)?;
        Ok(p.compose(&h).compose(&p) / m)
    }

    /// Total (additive) mean curvature `kappa = tr(shape operator)`.
    pub fn mean_curvature_at(&self, x: &Vector<N>) -> Result<f64> {
        Ok(self.shape_operator_at(x)?.trace())
    }

    /// The unit-normal extension `n = grad phi / |grad phi|` as a vector
    /// field. Its jacobian comes from the hessian of `phi`; its component
    /// hessians require third derivatives of `phi` and are present exactly
    /// when the level set carries them.
    pub fn normal_field(&self) -> VectorField<N> {
        let ls = self.clone();
        VectorField::from_jet_fn(move |x| ls.normal_jet(x))
    }

    fn normal_jet(&self, x: &Vector<N>) -> VectorJet<N> {
        let jet = self.field.jet(x);
        let g = jet.gradient;
        let m = g.norm();
        let h = jet
            .hessian
            .expect("level-set field must carry hessians for the normal field");
        let value = g / m;
        let hg = h.apply(&g);
        let m3 = m * m * m;
        // D n = H/m - g ⊗ (H g) / m^3
        let jacobian = h / m - outer(&g, &hg) / m3;
        let hessians = self.third.as_ref().map(|third| {
            let t = third(x);
            let h2 = h.compose(&h);
            let m5 = m3 * m * m;
            // tg[(j,k)] = sum_l T_{jlk} g_l
            let mut tg: Tensor<N> = Tensor::zero();
            for k in 0..N {
                let col = t[k].apply(&g);
                for j in 0..N {
                    tg[(j, k)] = col[j];
                }
            }
            let mut hessians = [Tensor::zero(); N];
            for i in 0..N {
                let mut hi = Tensor::zero();
                for j in 0..N {
                    for k in 0..N {
                        hi[(j, k)] = t[k][(i, j)] / m
                            - (h[(i, j)] * hg[k] + h[(i, k)] * hg[j]) / m3
                            - g[i] * (tg[(j, k)] + h2[(j, k)]) / m3
                            + 3.0 * g[i] * hg[j] * hg[k] / m5;
                    }
                }
                hessians[i] = hi;
            }
            hessians
        });
        VectorJet {
            value,
            jacobian,
            hessians,
        }
    }

    /// The extended tangential projector `P = I - n ⊗ n` as a tensor field
    /// with first derivatives.
    pub fn projector_field(&self) -> TensorField<N> {
        let normal = self.normal_field();
        TensorField::from_jet_fn(move |x| {
            let n = normal.jet(x);
            let value = Tensor::projector(&n.value);
            let mut gradient = [Tensor::zero(); N];
            for k in 0..N {
                // d_k (n_i n_j) = (Dn)_ik n_j + n_i (Dn)_jk
                for i in 0..N {
                    for j in 0..N {
                        gradient[k][(i, j)] = -(n.jacobian[(i, k)] * n.value[j]
                            + n.value[i] * n.jacobian[(j, k)]);
                    }
                }
            }
            TensorJet {
                value,
                gradient: Some(gradient),
            }
        })
    }

    /// Verify that `x` lies on the zero set, up to `tol` times the level-set
    /// magnitude scale.
    pub fn check_on_surface(&self, x: &Vector<N>, tol: f64) -> Result<()> {
        let d = self.phi(x).abs() / self.phi_scale;
        if d > tol {
            return Err(Error::OffSurface {
                point: x.0.to_vec(),
                distance: d,
            });
        }
        Ok(())
    }

    /// Project a point in the tube around the surface onto the zero set via
    /// the damped Newton step `x <- x - phi grad phi / |grad phi|^2`.
    /// Idempotent on points already on the surface.
    pub fn project_to_surface(&self, start: &Vector<N>) -> Result<Vector<N>> {
        for i in 0..N {
            let slack = self.tube_radius;
            if start[i] < self.bbox_min[i] - slack || start[i] > self.bbox_max[i] + slack {
                return Err(Error::OffSurface {
                    point: start.0.to_vec(),
                    distance: self.phi(start).abs() / self.phi_scale,
                });
            }
        }
        let mut x = *start;
        let max_step = 0.25 * self.scale;
        for _ in 0..PROJECTION_MAX_ITER {
            let phi = self.phi(&x);
            if phi.abs() <= PROJECTION_TOL * self.phi_scale {
                return Ok(x);
            }
            let g = self.grad_phi(&x);
            let g2 = g.norm_squared();
            if g2.sqrt() < DEGENERATE_GRADIENT {
                return Err(Error::DegenerateGradient {
                    point: x.0.to_vec(),
                    norm: g2.sqrt(),
                });
            }
            let mut step = g * (-phi / g2);
            let len = step.norm();
            if len > max_step {
                step = step * (max_step / len);
            }
            x += step;
        }
        Err(Error::ProjectionDiverged {
            iterations: PROJECTION_MAX_ITER,
            residual: self.phi(&x).abs() / self.phi_scale,
        })
    }
}

impl LevelSet<2> {
    /// Circle of radius `radius` centered at `center`: `phi = |x - c|^2 - R^2`.
    pub fn circle(center: Vector<2>, radius: f64) -> Self {
        let c = center;
        let field = ScalarField::from_jet_fn(move |x| {
            let y = *x - c;
            ScalarJet {
                value: y.norm_squared() - radius * radius,
                gradient: y * 2.0,
                hessian: Some(Tensor::identity() * 2.0),
            }
        });
        let pad = Vector::new([radius, radius]);
        LevelSet::new(
            field,
            Some(Arc::new(|_| [Tensor::zero(); 2])),
            radius,
            &(center + Vector::basis(0) * radius),
            center - pad,
            center + pad,
            0.5 * radius,
        )
    }
}

impl LevelSet<3> {
    /// Sphere of radius `radius` centered at `center`: `phi = |x - c|^2 - R^2`.
    pub fn sphere(center: Vector<3>, radius: f64) -> Self {
        let c = center;
        let field = ScalarField::from_jet_fn(move |x| {
            let y = *x - c;
            ScalarJet {
                value: y.norm_squared() - radius * radius,
                gradient: y * 2.0,
                hessian: Some(Tensor::identity() * 2.0),
            }
        });
        let pad = Vector::new([radius, radius, radius]);
        LevelSet::new(
            field,
            Some(Arc::new(|_| [Tensor::zero(); 3])),
            radius,
            &(center + Vector::basis(0) * radius),
            center - pad,
            center + pad,
            0.5 * radius,
        )
    }

    /// Axis-aligned ellipsoid with semi-axes `(a, b, c)` centered at
    /// `center`: `phi = sum (x_i - c_i)^2 / a_i^2 - 1`.
    pub fn ellipsoid(center: Vector<3>, semi_axes: [f64; 3]) -> Self {
        let c = center;
        let inv2 = Vector::new(semi_axes.map(|a| 1.0 / (a * a)));
        let field = ScalarField::from_jet_fn(move |x| {
            let y = *x - c;
            let mut hessian = Tensor::zero();
            let mut gradient = Vector::zero();
            let mut value = -1.0;
            for i in 0..3 {
                value += y[i] * y[i] * inv2[i];
                gradient[i] = 2.0 * y[i] * inv2[i];
                hessian[(i, i)] = 2.0 * inv2[i];
            }
            ScalarJet {
                value,
                gradient,
                hessian: Some(hessian),
            }
        });
        let scale = semi_axes.iter().cloned().fold(0.0f64, f64::max);
        let least = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        let pad = Vector::new(semi_axes);
        LevelSet::new(
            field,
            Some(Arc::new(|_| [Tensor::zero(); 3])),
            scale,
            &(center + Vector::basis(0) * semi_axes[0]),
            center - pad,
            center + pad,
            0.4 * least,
        )
    }

    /// Torus around the `z`-axis with major radius `major` and tube radius
    /// `minor`, centered at `center`:
    /// `phi = (|y|^2 + R^2 - r^2)^2 - 4 R^2 (y_1^2 + y_2^2)`, `y = x - c`.
    pub fn torus(center: Vector<3>, major: f64, minor: f64) -> Self {
        let c = center;
        let (rr, tr) = (major, minor);
        let field = ScalarField::from_jet_fn(move |x| {
            let y = *x - c;
            let u = y.norm_squared() + rr * rr - tr * tr;
            let planar = Vector::new([y[0], y[1], 0.0]);
            let value = u * u - 4.0 * rr * rr * (y[0] * y[0] + y[1] * y[1]);
            let gradient = y * (4.0 * u) - planar * (8.0 * rr * rr);
            let mut hessian = outer(&y, &y) * 8.0 + Tensor::identity() * (4.0 * u);
            hessian[(0, 0)] -= 8.0 * rr * rr;
            hessian[(1, 1)] -= 8.0 * rr * rr;
            ScalarJet {
                value,
                gradient,
                hessian: Some(hessian),
            }
        });
        let third = move |x: &Vector<3>| {
            let y = *x - c;
            let mut t = [Tensor::zero(); 3];
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = 0.0;
                        if i == j {
                            v += y[k];
                        }
                        if i == k {
                            v += y[j];
                        }
                        if j == k {
                            v += y[i];
                        }
                        t[k][(i, j)] = 8.0 * v;
                    }
                }
            }
            t
        };
        let pad = Vector::new([rr + tr, rr + tr, tr]);
        LevelSet::new(
            field,
            Some(Arc::new(third)),
            rr + tr,
            &(center + Vector::basis(0) * (rr + tr)),
            center - pad,
            center + pad,
            0.5 * tr,
        )
    }
}
