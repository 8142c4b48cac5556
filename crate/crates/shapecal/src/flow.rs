//! Deformation velocities and the finite-difference shape-derivative oracle.
//!
//! A [`Velocity`] is an ambient vector field together with optional exact
//! knowledge: some families (dilation about the origin, translations, unit
//! normal speed on spheres and tori) map the built-in surfaces onto other
//! built-in surfaces, so the perturbed geometry can be evaluated in closed
//! form. Everything else is transported numerically: surface points follow
//! the flow `dx/dt = V(x)` and chart tangent vectors follow the variational
//! equation `dτ/dt = DV(x) τ` under one fixed-step Runge–Kutta integrator.
//!
//! Transporting tangents (rather than differencing transported positions)
//! is what makes the oracle accurate: normals and area elements of the
//! deformed surface come out with integrator precision, and the only
//! finite difference in space is one centered difference of those exact
//! normals across a five-point chart stencil, which yields the Weingarten
//! map with `O(delta^2)` bias and `O(eps/delta)` roundoff. At the default
//! spacing both sit far below the `O(step^4)` Richardson differences used
//! in the flow parameter.
//!
//! The oracle subtracts tangential convection from each material
//! derivative, so results are the local (Eulerian) shape derivatives the
//! closed-form library predicts. No step reuses those closed forms:
//! agreement is evidence, not circularity.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::field::{Polynomial, ScalarField, ScalarJet, VectorField, VectorJet};
use crate::functionals::FunctionalKind;
use crate::invariants::InvariantBundle;
use crate::levelset::LevelSet;
use crate::quadrature::stable_sum;
use crate::surface::{AnalyticSurface, SurfaceKind, SurfacePoint};
use crate::tangential::{laplace_beltrami, tangential_divergence, tangential_gradient, tangential_jacobian};
use crate::tensor::{outer, Tensor, Vector};
use crate::{Error, Result};

/// Finite-difference configuration for the oracle.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Half-width of the central difference in the flow parameter.
    pub step: f64,
    /// Apply one Richardson extrapolation (error `O(step^4)`).
    pub richardson: bool,
    /// Chart-space spacing of the probe stencil.
    pub probe_delta: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            step: 1e-3,
            richardson: true,
            probe_delta: 1e-5,
        }
    }
}

/// How a velocity family acts on the built-in surface descriptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// No exact structure; transport numerically.
    Generic,
    /// `V = x`: flow is dilation by `e^t` about the origin.
    Dilation,
    /// Constant velocity: flow shifts by `t c`.
    Translation([f64; 3]),
    /// `V = x / |x|`: spheres about the origin inflate at unit rate.
    RadialUnit,
    /// Unit speed along the surface normal of the base shape.
    NormalInflation,
}

impl Family {
    /// The surface the flow produces at time `t`, when the family keeps the
    /// base shape inside its parameter family.
    pub fn exact_kind(&self, base: SurfaceKind, t: f64) -> Option<SurfaceKind> {
        let origin = |c: [f64; 3]| c == [0.0; 3];
        match *self {
            Family::Generic => None,
            Family::Dilation => Some(base.dilated(t.exp())),
            Family::Translation(c) => {
                Some(base.translated([c[0] * t, c[1] * t, c[2] * t]))
            }
            Family::RadialUnit => match base {
                SurfaceKind::Sphere { center, radius } if origin(center) => {
                    Some(SurfaceKind::sphere(radius + t))
                }
                _ => None,
            },
            Family::NormalInflation => match base {
                SurfaceKind::Sphere { center, radius } if origin(center) => {
                    Some(SurfaceKind::sphere(radius + t))
                }
                SurfaceKind::Torus {
                    center,
                    major,
                    minor,
                } if origin(center) => Some(SurfaceKind::Torus {
                    center,
                    major,
                    minor: minor + t,
                }),
                _ => None,
            },
        }
    }

    /// Where the flow carries a point of the base surface by time `t`, when
    /// known in closed form (must be paired with [`Family::exact_kind`]).
    pub fn exact_map(&self, base: SurfaceKind, x: &Vector<3>, t: f64) -> Option<Vector<3>> {
        match *self {
            Family::Generic => None,
            Family::Dilation => Some(*x * t.exp()),
            Family::Translation(c) => Some(*x + Vector::new(c) * t),
            Family::RadialUnit => {
                let r = x.norm();
                Some(*x * ((r + t) / r))
            }
            Family::NormalInflation => match base {
                SurfaceKind::Sphere { .. } => {
                    let r = x.norm();
                    Some(*x * ((r + t) / r))
                }
                SurfaceKind::Torus { major, .. } => {
                    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                    let ring = Vector::new([major * x[0] / rho, major * x[1] / rho, 0.0]);
                    let m = *x - ring;
                    let d = m.norm();
                    Some(ring + m * ((d + t) / d))
                }
                SurfaceKind::Ellipsoid { .. } => None,
            },
        }
    }
}

/// A deformation velocity: the ambient field, an optional exact normal
/// speed (used when the field's own derivatives cannot reach deep enough,
/// e.g. unit-normal flows built from distance functions), and the family
/// tag that unlocks closed-form perturbed surfaces.
#[derive(Clone)]
pub struct Velocity {
    pub name: String,
    pub field: VectorField<3>,
    pub normal_speed_override: Option<ScalarField<3>>,
    pub family: Family,
}

impl Velocity {
    /// `V = x`.
    pub fn dilation() -> Self {
        Velocity {
            name: "dilation".into(),
            field: VectorField::position(),
            normal_speed_override: None,
            family: Family::Dilation,
        }
    }

    /// Constant velocity `V = c`.
    pub fn translation(c: Vector<3>) -> Self {
        Velocity {
            name: format!("translation({},{},{})", c[0], c[1], c[2]),
            field: VectorField::constant(c),
            normal_speed_override: None,
            family: Family::Translation(c.0),
        }
    }

    /// `V = x / |x|` (unit radial speed; singular at the origin).
    pub fn radial_unit() -> Self {
        // x/|x| is the unit normal field of spheres about the origin, whose
        // jets (including second derivatives) the level set provides.
        Velocity {
            name: "radial_unit".into(),
            field: LevelSet::sphere(Vector::zero(), 1.0).normal_field(),
            normal_speed_override: None,
            family: Family::RadialUnit,
        }
    }

    /// Unit speed along the outward normal of the given base shape
    /// (origin-centered shapes only). The normal speed is identically one
    /// on the surface, which is recorded exactly rather than recovered from
    /// field derivatives.
    pub fn normal_inflation(base: SurfaceKind) -> Result<Self> {
        let origin = |c: [f64; 3]| c == [0.0; 3];
        let field = match base {
            SurfaceKind::Sphere { center, .. } if origin(center) => {
                LevelSet::sphere(Vector::zero(), 1.0).normal_field()
            }
            SurfaceKind::Ellipsoid { center, semi_axes } if origin(center) => {
                LevelSet::ellipsoid(Vector::zero(), semi_axes).normal_field()
            }
            SurfaceKind::Torus { center, major, .. } if origin(center) => {
                tube_distance_gradient(major)
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "normal_inflation requires an origin-centered base shape".into(),
                ))
            }
        };
        Ok(Velocity {
            name: "normal_inflation".into(),
            field,
            normal_speed_override: Some(ScalarField::constant(1.0)),
            family: Family::NormalInflation,
        })
    }

    /// A deterministic random polynomial velocity.
    pub fn random_polynomial(degree: u8, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = VectorField::polynomial([
            Polynomial::random(degree, amplitude, &mut rng),
            Polynomial::random(degree, amplitude, &mut rng),
            Polynomial::random(degree, amplitude, &mut rng),
        ]);
        Velocity {
            name: format!("random_polynomial(degree={degree},seed={seed})"),
            field,
            normal_speed_override: None,
            family: Family::Generic,
        }
    }

    /// The same velocity windowed by the C² bump `(1 − |x|²/ρ²)³`,
    /// supported in the open ball of radius `ρ` about the origin. The bump
    /// carries exact first and second derivatives, so windowed fields stay
    /// usable wherever full jets are required.
    pub fn with_support(self, radius: f64) -> Self {
        let rho2 = radius * radius;
        let bump = ScalarField::from_jet_fn(move |x: &Vector<3>| {
            let s = x.dot(x) / rho2;
            if s >= 1.0 {
                return ScalarJet {
                    value: 0.0,
                    gradient: Vector::zero(),
                    hessian: Some(Tensor::zero()),
                };
            }
            let w = 1.0 - s;
            let mut hessian = outer(x, x) * (24.0 * w / (rho2 * rho2));
            hessian = hessian + Tensor::identity() * (-6.0 * w * w / rho2);
            ScalarJet {
                value: w * w * w,
                gradient: *x * (-6.0 * w * w / rho2),
                hessian: Some(hessian),
            }
        });
        Velocity {
            name: format!("{} in |x| < {radius}", self.name),
            field: self.field.scaled_by(&bump),
            normal_speed_override: None,
            family: Family::Generic,
        }
    }

    /// The tangential part `P V` of another velocity with respect to a
    /// surface: its flow slides along the surface without deforming it.
    /// The normal speed is computed honestly from the field (it vanishes
    /// only up to roundoff), not overridden.
    pub fn tangentialized(ls: &LevelSet<3>, inner: &Velocity) -> Self {
        let n = ls.normal_field();
        let vn = inner.field.dot(&n);
        let field = inner.field.sum(&n.scaled_by(&vn).scaled(-1.0));
        Velocity {
            name: format!("tangential({})", inner.name),
            field,
            normal_speed_override: None,
            family: Family::Generic,
        }
    }

    /// The normal speed `v = V · n` as a scalar extension field.
    pub fn normal_speed(&self, ls: &LevelSet<3>) -> ScalarField<3> {
        match &self.normal_speed_override {
            Some(f) => f.clone(),
            None => self.field.dot(&ls.normal_field()),
        }
    }
}

/// Gradient of the distance to the circle of radius `major` in the
/// `z = 0` plane: the unit normal field of the tubes around that circle.
/// Carries value and jacobian (no second derivatives).
fn tube_distance_gradient(major: f64) -> VectorField<3> {
    VectorField::from_jet_fn(move |x: &Vector<3>| {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let e_ring = Vector::new([x[0] / rho, x[1] / rho, 0.0]);
        let e_z = Vector::basis(2);
        let s = rho - major;
        let d = (s * s + x[2] * x[2]).sqrt();
        let value = (e_ring * s + e_z * x[2]) / d;
        let planar = {
            let mut e = Tensor::zero();
            e[(0, 0)] = 1.0;
            e[(1, 1)] = 1.0;
            e
        };
        let jacobian = (outer(&e_ring, &e_ring) + outer(&e_z, &e_z) - outer(&value, &value)) / d
            + (planar - outer(&e_ring, &e_ring)) * (s / (rho * d));
        VectorJet {
            value,
            jacobian,
            hessians: None,
        }
    })
}

/// A surface point with the two chart tangent vectors attached.
#[derive(Debug, Clone, Copy)]
pub struct MaterialFrame {
    pub point: Vector<3>,
    pub tangent_u: Vector<3>,
    pub tangent_v: Vector<3>,
}

impl MaterialFrame {
    pub fn normal(&self) -> Vector<3> {
        self.tangent_u.cross(&self.tangent_v).normalized()
    }

    pub fn area_element(&self) -> f64 {
        self.tangent_u.cross(&self.tangent_v).norm()
    }
}

/// Fixed-step classical Runge–Kutta for `dx/dt = V(x)` from `t = 0` to `t`.
pub fn flow_point(field: &VectorField<3>, x0: &Vector<3>, t: f64, steps: usize) -> Vector<3> {
    let n = steps.max(1);
    let h = t / n as f64;
    let mut x = *x0;
    for _ in 0..n {
        let k1 = field.value(&x);
        let k2 = field.value(&(x + k1 * (0.5 * h)));
        let k3 = field.value(&(x + k2 * (0.5 * h)));
        let k4 = field.value(&(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Transport a frame along the flow: the point obeys `dx/dt = V(x)` and
/// each tangent the variational equation `dτ/dt = DV(x) τ`.
pub fn flow_frame(field: &VectorField<3>, frame: &MaterialFrame, t: f64, steps: usize) -> MaterialFrame {
    #[derive(Clone, Copy)]
    struct State {
        x: Vector<3>,
        tu: Vector<3>,
        tv: Vector<3>,
    }
    let rate = |s: &State| {
        let jet = field.jet(&s.x);
        State {
            x: jet.value,
            tu: jet.jacobian.apply(&s.tu),
            tv: jet.jacobian.apply(&s.tv),
        }
    };
    let step_by = |s: &State, k: &State, h: f64| State {
        x: s.x + k.x * h,
        tu: s.tu + k.tu * h,
        tv: s.tv + k.tv * h,
    };
    let n = steps.max(1);
    let h = t / n as f64;
    let mut s = State {
        x: frame.point,
        tu: frame.tangent_u,
        tv: frame.tangent_v,
    };
    for _ in 0..n {
        let k1 = rate(&s);
        let k2 = rate(&step_by(&s, &k1, 0.5 * h));
        let k3 = rate(&step_by(&s, &k2, 0.5 * h));
        let k4 = rate(&step_by(&s, &k3, h));
        s = State {
            x: s.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (h / 6.0),
            tu: s.tu + (k1.tu + k2.tu * 2.0 + k3.tu * 2.0 + k4.tu) * (h / 6.0),
            tv: s.tv + (k1.tv + k2.tv * 2.0 + k3.tv * 2.0 + k4.tv) * (h / 6.0),
        };
    }
    MaterialFrame {
        point: s.x,
        tangent_u: s.tu,
        tangent_v: s.tv,
    }
}

fn flow_steps(t: f64) -> usize {
    ((t.abs() / 0.01).ceil() as usize).max(16)
}

/// Chart-space offsets of the probe stencil, in units of the spacing:
/// center, then the four axis neighbours. Order is load-bearing.
const STENCIL: [(i8, i8); 5] = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];

/// The five base-surface frames of a probe around a charted point, with
/// tangents taken from the exact chart jets.
pub fn probe_frames(surface: &AnalyticSurface, sp: &SurfacePoint, delta: f64) -> [MaterialFrame; 5] {
    let chart = &surface.charts()[sp.chart];
    let mut frames = [MaterialFrame {
        point: Vector::zero(),
        tangent_u: Vector::zero(),
        tangent_v: Vector::zero(),
    }; 5];
    for (i, (a, b)) in STENCIL.iter().enumerate() {
        let jet = chart.jet(
            sp.uv.0 + *a as f64 * delta,
            sp.uv.1 + *b as f64 * delta,
        );
        frames[i] = MaterialFrame {
            point: jet.point,
            tangent_u: jet.du,
            tangent_v: jet.dv,
        };
    }
    frames
}

/// First-order surface data at the center of a transported probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeGeometry {
    pub point: Vector<3>,
    pub tangent_u: Vector<3>,
    pub tangent_v: Vector<3>,
    pub normal: Vector<3>,
    pub shape_operator: Tensor<3>,
}

impl ProbeGeometry {
    pub fn invariants(&self) -> Result<InvariantBundle> {
        InvariantBundle::from_shape_operator(&self.shape_operator)
    }

    pub fn area_element(&self) -> f64 {
        self.tangent_u.cross(&self.tangent_v).norm()
    }

    /// Matrix with columns `(tangent_u, tangent_v, normal)`.
    fn frame(&self) -> Tensor<3> {
        let mut b = Tensor::zero();
        for i in 0..3 {
            b[(i, 0)] = self.tangent_u[i];
            b[(i, 1)] = self.tangent_v[i];
            b[(i, 2)] = self.normal[i];
        }
        b
    }
}

fn degenerate(at: &Vector<3>, frame: &Tensor<3>) -> Error {
    Error::DegenerateGradient {
        point: at.0.to_vec(),
        norm: frame.det().abs(),
    }
}

/// Reconstruct the surface geometry at the probe center from the five
/// transported frames. Normals come from the exact tangents; the
/// Weingarten map solves `DN [τ_u τ_v ν] = [∂_u ν, ∂_v ν, 0]` with the
/// normal derivatives centered across the stencil.
pub fn reconstruct_geometry(frames: &[MaterialFrame; 5], delta: f64) -> Result<ProbeGeometry> {
    let normal = frames[0].normal();
    let dn_u = (frames[1].normal() - frames[2].normal()) / (2.0 * delta);
    let dn_v = (frames[3].normal() - frames[4].normal()) / (2.0 * delta);
    let geometry = ProbeGeometry {
        point: frames[0].point,
        tangent_u: frames[0].tangent_u,
        tangent_v: frames[0].tangent_v,
        normal,
        shape_operator: Tensor::zero(),
    };
    let bt = geometry.frame().transpose();
    let mut dn = Tensor::zero();
    for i in 0..3 {
        let rhs = Vector::new([dn_u[i], dn_v[i], 0.0]);
        let row = bt
            .solve(&rhs)
            .ok_or_else(|| degenerate(&frames[0].point, &geometry.frame()))?;
        for j in 0..3 {
            dn[(i, j)] = row[j];
        }
    }
    let p = Tensor::projector(&normal);
    let shape_operator = p.compose(&dn.symmetric_part()).compose(&p);
    Ok(ProbeGeometry {
        shape_operator,
        ..geometry
    })
}

/// Tangential gradient of a sampled scalar from its five stencil values.
pub fn reconstruct_scalar_gradient(
    geometry: &ProbeGeometry,
    values: &[f64; 5],
    delta: f64,
) -> Result<Vector<3>> {
    let zu = (values[1] - values[2]) / (2.0 * delta);
    let zv = (values[3] - values[4]) / (2.0 * delta);
    let bt = geometry.frame().transpose();
    bt.solve(&Vector::new([zu, zv, 0.0]))
        .ok_or_else(|| degenerate(&geometry.point, &geometry.frame()))
}

/// Tangential jacobian of a sampled vector from its five stencil values.
pub fn reconstruct_vector_jacobian(
    geometry: &ProbeGeometry,
    values: &[Vector<3>; 5],
    delta: f64,
) -> Result<Tensor<3>> {
    let wu = (values[1] - values[2]) / (2.0 * delta);
    let wv = (values[3] - values[4]) / (2.0 * delta);
    let bt = geometry.frame().transpose();
    let mut jac = Tensor::zero();
    for i in 0..3 {
        let rhs = Vector::new([wu[i], wv[i], 0.0]);
        let row = bt
            .solve(&rhs)
            .ok_or_else(|| degenerate(&geometry.point, &geometry.frame()))?;
        for j in 0..3 {
            jac[(i, j)] = row[j];
        }
    }
    Ok(jac)
}

/// Finite-difference oracle for shape derivatives on an analytic surface.
pub struct ShapeDerivativeOracle<'a> {
    pub surface: &'a AnalyticSurface,
    pub velocity: &'a Velocity,
    pub cfg: FdConfig,
}

impl<'a> ShapeDerivativeOracle<'a> {
    pub fn new(surface: &'a AnalyticSurface, velocity: &'a Velocity) -> Self {
        ShapeDerivativeOracle {
            surface,
            velocity,
            cfg: FdConfig::default(),
        }
    }

    fn differentiate<T, F>(&self, mut f: F) -> Result<T>
    where
        F: FnMut(f64) -> Result<T>,
        T: Linear,
    {
        let h = self.cfg.step;
        let d1 = T::lincomb(1.0 / (2.0 * h), &f(h)?, -1.0 / (2.0 * h), &f(-h)?);
        if !self.cfg.richardson {
            return Ok(d1);
        }
        let d2 = T::lincomb(1.0 / h, &f(0.5 * h)?, -1.0 / h, &f(-0.5 * h)?);
        Ok(T::lincomb(4.0 / 3.0, &d2, -1.0 / 3.0, &d1))
    }

    /// Geometry of the deformed surface at the material image of `sp` at
    /// flow time `t` — in closed form for exact families, otherwise by
    /// transporting the probe frames and reconstructing.
    pub fn geometry_at(&self, sp: &SurfacePoint, t: f64) -> Result<ProbeGeometry> {
        let base_kind = self.surface.kind();
        if let (Some(kind_t), Some(x_t)) = (
            self.velocity.family.exact_kind(base_kind, t),
            self.velocity.family.exact_map(base_kind, &sp.point, t),
        ) {
            let surf_t = AnalyticSurface::from_kind(kind_t);
            let ls = surf_t.level_set();
            let normal = ls.normal_at(&x_t)?;
            let shape_operator = ls.shape_operator_at(&x_t)?;
            // Tangents are not needed on this path; supply an orthonormal
            // pair so the frame stays invertible for scalar reconstruction.
            let tangent_u = orthogonal_to(&normal);
            let tangent_v = normal.cross(&tangent_u);
            return Ok(ProbeGeometry {
                point: x_t,
                tangent_u,
                tangent_v,
                normal,
                shape_operator,
            });
        }
        let base = probe_frames(self.surface, sp, self.cfg.probe_delta);
        let steps = flow_steps(t);
        let mut moved = base;
        for (slot, frame) in moved.iter_mut().zip(base.iter()) {
            *slot = flow_frame(&self.velocity.field, frame, t, steps);
        }
        reconstruct_geometry(&moved, self.cfg.probe_delta)
    }

    /// Tangential gradient of an analytically evaluable scalar at the base
    /// point, from centered chart differences against the exact chart
    /// frame (used for the convection term of local derivatives).
    fn chart_tangential_gradient<F>(&self, sp: &SurfacePoint, f: F) -> Result<Vector<3>>
    where
        F: Fn(&Vector<3>) -> Result<f64>,
    {
        let delta = self.cfg.probe_delta;
        let frames = probe_frames(self.surface, sp, delta);
        let mut values = [0.0; 5];
        for (v, frame) in values.iter_mut().zip(frames.iter()) {
            *v = f(&frame.point)?;
        }
        let geometry = ProbeGeometry {
            point: sp.point,
            tangent_u: frames[0].tangent_u,
            tangent_v: frames[0].tangent_v,
            normal: self.surface.level_set().normal_at(&sp.point)?,
            shape_operator: Tensor::zero(),
        };
        reconstruct_scalar_gradient(&geometry, &values, delta)
    }

    fn convection<F>(&self, sp: &SurfacePoint, f: F) -> Result<f64>
    where
        F: Fn(&Vector<3>) -> Result<f64>,
    {
        let grad = self.chart_tangential_gradient(sp, f)?;
        Ok(grad.dot(&self.velocity.field.value(&sp.point)))
    }

    /// Local derivative of the total mean curvature.
    pub fn curvature_prime(&self, sp: &SurfacePoint) -> Result<f64> {
        let material = self.differentiate(|t| {
            Ok(self.geometry_at(sp, t)?.shape_operator.trace())
        })?;
        let ls = self.surface.level_set();
        let conv = self.convection(sp, |x| Ok(ls.shape_operator_at(x)?.trace()))?;
        Ok(material - conv)
    }

    /// Local derivative of the Gauss curvature.
    pub fn gauss_curvature_prime(&self, sp: &SurfacePoint) -> Result<f64> {
        let material = self.differentiate(|t| {
            let g = self.geometry_at(sp, t)?;
            Ok(g.invariants()?.gauss_curvature(3))
        })?;
        let ls = self.surface.level_set();
        let conv = self.convection(sp, |x| {
            let s = ls.shape_operator_at(x)?;
            Ok(InvariantBundle::from_shape_operator(&s)?.gauss_curvature(3))
        })?;
        Ok(material - conv)
    }

    /// Local derivative of the trace power `I_p`.
    pub fn trace_power_prime(&self, p: usize, sp: &SurfacePoint) -> Result<f64> {
        let material = self.differentiate(|t| {
            Ok(self.geometry_at(sp, t)?.shape_operator.power(p).trace())
        })?;
        let ls = self.surface.level_set();
        let conv = self.convection(sp, |x| {
            Ok(ls.shape_operator_at(x)?.power(p).trace())
        })?;
        Ok(material - conv)
    }

    /// Local derivative of the unit normal (a tangent vector).
    pub fn normal_prime(&self, sp: &SurfacePoint) -> Result<Vector<3>> {
        let material =
            self.differentiate(|t| Ok(self.geometry_at(sp, t)?.normal))?;
        let ls = self.surface.level_set();
        let mut conv = Vector::zero();
        for i in 0..3 {
            conv[i] = self.convection(sp, |x| Ok(ls.normal_at(x)?[i]))?;
        }
        Ok(material - conv)
    }

    /// Local derivative of the restriction of a fixed ambient function.
    pub fn restriction_prime(&self, phi: &ScalarField<3>, sp: &SurfacePoint) -> Result<f64> {
        let base_kind = self.surface.kind();
        let material = self.differentiate(|t| {
            let x_t = match self.velocity.family.exact_map(base_kind, &sp.point, t) {
                Some(x) => x,
                None => flow_point(&self.velocity.field, &sp.point, t, flow_steps(t)),
            };
            Ok(phi.value(&x_t))
        })?;
        let ls = self.surface.level_set();
        let conv = tangential_gradient(ls, phi, &sp.point)?
            .dot(&self.velocity.field.value(&sp.point));
        Ok(material - conv)
    }

    /// Local derivative of the tangential gradient of a fixed ambient
    /// function's restriction.
    pub fn tangential_gradient_prime(
        &self,
        phi: &ScalarField<3>,
        sp: &SurfacePoint,
    ) -> Result<Vector<3>> {
        let base_kind = self.surface.kind();
        let material = self.differentiate(|t| {
            if let (Some(kind_t), Some(x_t)) = (
                self.velocity.family.exact_kind(base_kind, t),
                self.velocity.family.exact_map(base_kind, &sp.point, t),
            ) {
                let surf_t = AnalyticSurface::from_kind(kind_t);
                return tangential_gradient(surf_t.level_set(), phi, &x_t);
            }
            let base = probe_frames(self.surface, sp, self.cfg.probe_delta);
            let steps = flow_steps(t);
            let mut moved = base;
            let mut values = [0.0; 5];
            for i in 0..5 {
                moved[i] = flow_frame(&self.velocity.field, &base[i], t, steps);
                values[i] = phi.value(&moved[i].point);
            }
            let geometry = reconstruct_geometry(&moved, self.cfg.probe_delta)?;
            reconstruct_scalar_gradient(&geometry, &values, self.cfg.probe_delta)
        })?;
        let ls = self.surface.level_set();
        let mut conv = Vector::zero();
        for i in 0..3 {
            conv[i] = self.convection(sp, |x| Ok(tangential_gradient(ls, phi, x)?[i]))?;
        }
        Ok(material - conv)
    }

    fn exact_surface_at(&self, t: f64) -> Result<AnalyticSurface> {
        self.velocity
            .family
            .exact_kind(self.surface.kind(), t)
            .map(AnalyticSurface::from_kind)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "oracle for second-order tangential operators needs a velocity \
                     with a closed-form flow; '{}' has none on this surface",
                    self.velocity.name
                ))
            })
    }

    /// Local derivative of `lap_Γ` of a fixed ambient function's
    /// restriction. Closed-form flow families only.
    pub fn laplace_beltrami_prime(
        &self,
        phi: &ScalarField<3>,
        sp: &SurfacePoint,
    ) -> Result<f64> {
        let base_kind = self.surface.kind();
        let material = self.differentiate(|t| {
            let surf_t = self.exact_surface_at(t)?;
            let x_t = self
                .velocity
                .family
                .exact_map(base_kind, &sp.point, t)
                .expect("exact_kind and exact_map come in pairs");
            laplace_beltrami(surf_t.level_set(), phi, &x_t)
        })?;
        let ls = self.surface.level_set();
        let conv = self.convection(sp, |x| laplace_beltrami(ls, phi, x))?;
        Ok(material - conv)
    }

    /// Local derivative of the tangential jacobian of a fixed ambient
    /// vector field's restriction. Closed-form flow families only.
    pub fn tangential_jacobian_prime(
        &self,
        w: &VectorField<3>,
        sp: &SurfacePoint,
    ) -> Result<Tensor<3>> {
        let base_kind = self.surface.kind();
        let material = self.differentiate(|t| {
            let surf_t = self.exact_surface_at(t)?;
            let x_t = self
                .velocity
                .family
                .exact_map(base_kind, &sp.point, t)
                .expect("exact_kind and exact_map come in pairs");
            tangential_jacobian(surf_t.level_set(), w, &x_t)
        })?;
        let ls = self.surface.level_set();
        let mut conv = Tensor::zero();
        for i in 0..3 {
            for j in 0..3 {
                conv[(i, j)] =
                    self.convection(sp, |x| Ok(tangential_jacobian(ls, w, x)?[(i, j)]))?;
            }
        }
        Ok(material - conv)
    }

    /// Local derivative of the tangential divergence of a fixed ambient
    /// vector field's restriction. Closed-form flow families only.
    pub fn tangential_divergence_prime(
        &self,
        w: &VectorField<3>,
        sp: &SurfacePoint,
    ) -> Result<f64> {
        let base_kind = self.surface.kind();
        let material = self.differentiate(|t| {
            let surf_t = self.exact_surface_at(t)?;
            let x_t = self
                .velocity
                .family
                .exact_map(base_kind, &sp.point, t)
                .expect("exact_kind and exact_map come in pairs");
            tangential_divergence(surf_t.level_set(), w, &x_t)
        })?;
        let ls = self.surface.level_set();
        let conv = self.convection(sp, |x| tangential_divergence(ls, w, x))?;
        Ok(material - conv)
    }

    /// Finite-difference derivatives of several functionals at once,
    /// sharing the transported geometry between them.
    pub fn functional_derivatives(
        &self,
        kinds: &[FunctionalKind],
        q: usize,
    ) -> Result<Vec<f64>> {
        let h = self.cfg.step;
        let values = |t: f64| -> Result<Vec<f64>> { self.functional_values_at(kinds, q, t) };
        let vp = values(h)?;
        let vm = values(-h)?;
        let d1: Vec<f64> = vp
            .iter()
            .zip(&vm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        if !self.cfg.richardson {
            return Ok(d1);
        }
        let vp2 = values(0.5 * h)?;
        let vm2 = values(-0.5 * h)?;
        Ok(d1
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let d2 = (vp2[i] - vm2[i]) / h;
                (4.0 * d2 - d) / 3.0
            })
            .collect())
    }

    /// `J(Γ_t)` for each functional.
    fn functional_values_at(
        &self,
        kinds: &[FunctionalKind],
        q: usize,
        t: f64,
    ) -> Result<Vec<f64>> {
        if let Some(kind_t) = self.velocity.family.exact_kind(self.surface.kind(), t) {
            let surf_t = AnalyticSurface::from_kind(kind_t);
            return kinds.iter().map(|k| k.value(&surf_t, q)).collect();
        }
        let nodes = self.surface.quadrature(q)?;
        let delta = self.cfg.probe_delta;
        let steps = flow_steps(t);
        let field = &self.velocity.field;
        let per_node: Vec<Result<Vec<f64>>> = nodes
            .par_iter()
            .map(|node| {
                let sp = SurfacePoint {
                    chart: node.chart,
                    uv: node.uv,
                    point: node.point,
                };
                let base = probe_frames(self.surface, &sp, delta);
                let mut moved = base;
                for (slot, frame) in moved.iter_mut().zip(base.iter()) {
                    *slot = flow_frame(field, frame, t, steps);
                }
                let geometry = reconstruct_geometry(&moved, delta)?;
                let weight = node.gl_weight * geometry.area_element();
                let inv = geometry.invariants()?;
                let deformed_node = crate::surface::QuadratureNode {
                    point: geometry.point,
                    weight,
                    normal: geometry.normal,
                    shape_operator: geometry.shape_operator,
                    invariants: inv,
                    chart: node.chart,
                    uv: node.uv,
                    gl_weight: node.gl_weight,
                };
                Ok(kinds
                    .iter()
                    .map(|k| weight * k.integrand(&deformed_node))
                    .collect())
            })
            .collect();
        let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(nodes.len()); kinds.len()];
        for row in per_node {
            let row = row?;
            for (k, v) in row.into_iter().enumerate() {
                columns[k].push(v);
            }
        }
        Ok(columns.iter().map(|c| stable_sum(c)).collect())
    }
}

fn orthogonal_to(n: &Vector<3>) -> Vector<3> {
    let pick = if n[0].abs() < 0.7 {
        Vector::basis(0)
    } else {
        Vector::basis(1)
    };
    (pick - *n * pick.dot(n)).normalized()
}

/// Minimal linear-combination support for the Richardson driver.
trait Linear: Sized {
    fn lincomb(ca: f64, a: &Self, cb: f64, b: &Self) -> Self;
}

impl Linear for f64 {
    fn lincomb(ca: f64, a: &Self, cb: f64, b: &Self) -> Self {
        ca * a + cb * b
    }
}

impl Linear for Vector<3> {
    fn lincomb(ca: f64, a: &Self, cb: f64, b: &Self) -> Self {
        *a * ca + *b * cb
    }
}

impl Linear for Tensor<3> {
    fn lincomb(ca: f64, a: &Self, cb: f64, b: &Self) -> Self {
        *a * ca + *b * cb
    }
}
