//! Analytic surfaces: level-set geometry paired with smooth charts.
//!
//! A chart supplies points and parameter derivatives for quadrature and for
//! finite-difference probes; the level set supplies normals, shape
//! operators, and curvature invariants at those points. Built-in surfaces
//! (sphere, ellipsoid, torus) are described by a [`SurfaceKind`] value that
//! is closed under dilation, translation, and (where the shape family
//! permits) normal offset — which gives exact reference geometries for
//! perturbation tests.

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::invariants::InvariantBundle;
use crate::levelset::LevelSet;
use crate::quadrature::{gauss_legendre_on, parallel_map_sum};
use crate::tensor::{Tensor, Vector};
use crate::Result;

const TAU: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Point and parameter derivatives of a chart at `(u, v)`.
#[derive(Debug, Clone, Copy)]
pub struct ChartJet {
    pub point: Vector<3>,
    pub du: Vector<3>,
    pub dv: Vector<3>,
    pub duu: Vector<3>,
    pub duv: Vector<3>,
    pub dvv: Vector<3>,
}

type ChartEval = dyn Fn(f64, f64) -> ChartJet + Send + Sync;

/// A smooth parametrization of (a piece of) a surface over a rectangle.
#[derive(Clone)]
pub struct Chart {
    eval: Arc<ChartEval>,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
}

impl Chart {
    pub fn new(
        eval: Arc<ChartEval>,
        u_range: (f64, f64),
        v_range: (f64, f64),
    ) -> Self {
        Chart {
            eval,
            u_range,
            v_range,
        }
    }

    pub fn jet(&self, u: f64, v: f64) -> ChartJet {
        (self.eval)(u, v)
    }

    pub fn point(&self, u: f64, v: f64) -> Vector<3> {
        self.jet(u, v).point
    }

    /// Area element `|x_u × x_v|`.
    pub fn area_element(&self, u: f64, v: f64) -> f64 {
        let j = self.jet(u, v);
        j.du.cross(&j.dv).norm()
    }

    /// Unit normal in the chart's orientation, `x_u × x_v / |x_u × x_v|`.
    pub fn normal(&self, u: f64, v: f64) -> Vector<3> {
        let j = self.jet(u, v);
        j.du.cross(&j.dv).normalized()
    }
}

/// A point on a surface remembered together with its chart coordinates.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub chart: usize,
    pub uv: (f64, f64),
    pub point: Vector<3>,
}

/// One node of a surface quadrature rule, with the geometry evaluated there.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureNode {
    pub point: Vector<3>,
    /// Full weight: parameter weights times the area element.
    pub weight: f64,
    pub normal: Vector<3>,
    pub shape_operator: Tensor<3>,
    pub invariants: InvariantBundle,
    pub chart: usize,
    pub uv: (f64, f64),
    /// Parameter-space weight alone (without the area element).
    pub gl_weight: f64,
}

/// Parameter description of a built-in surface. Closed under dilation about
/// the origin and translation; normal offset stays in the family for
/// spheres and tori.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SurfaceKind {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Ellipsoid {
        center: [f64; 3],
        semi_axes: [f64; 3],
    },
    Torus {
        center: [f64; 3],
        major: f64,
        minor: f64,
    },
}

impl SurfaceKind {
    pub fn sphere(radius: f64) -> Self {
        SurfaceKind::Sphere {
            center: [0.0; 3],
            radius,
        }
    }

    pub fn ellipsoid(semi_axes: [f64; 3]) -> Self {
        SurfaceKind::Ellipsoid {
            center: [0.0; 3],
            semi_axes,
        }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        SurfaceKind::Torus {
            center: [0.0; 3],
            major,
            minor,
        }
    }

    /// Image under `x -> factor * x` (dilation about the origin).
    pub fn dilated(&self, factor: f64) -> Self {
        let s = factor;
        match *self {
            SurfaceKind::Sphere { center, radius } => SurfaceKind::Sphere {
                center: center.map(|c| c * s),
                radius: radius * s,
            },
            SurfaceKind::Ellipsoid { center, semi_axes } => SurfaceKind::Ellipsoid {
                center: center.map(|c| c * s),
                semi_axes: semi_axes.map(|a| a * s),
            },
            SurfaceKind::Torus {
                center,
                major,
                minor,
            } => SurfaceKind::Torus {
                center: center.map(|c| c * s),
                major: major * s,
                minor: minor * s,
            },
        }
    }

    /// Image under `x -> x + shift`.
    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let add = |c: [f64; 3]| [c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]];
        match *self {
            SurfaceKind::Sphere { center, radius } => SurfaceKind::Sphere {
                center: add(center),
                radius,
            },
            SurfaceKind::Ellipsoid { center, semi_axes } => SurfaceKind::Ellipsoid {
                center: add(center),
                semi_axes,
            },
            SurfaceKind::Torus {
                center,
                major,
                minor,
            } => SurfaceKind::Torus {
                center: add(center),
                major,
                minor,
            },
        }
    }

    /// Surface moved distance `t` along its outward normal, when the result
    /// stays in the same shape family (spheres and tori; an offset ellipsoid
    /// is not an ellipsoid).
    pub fn normal_offset(&self, t: f64) -> Option<Self> {
        match *self {
            SurfaceKind::Sphere { center, radius } => Some(SurfaceKind::Sphere {
                center,
                radius: radius + t,
            }),
            SurfaceKind::Torus {
                center,
                major,
                minor,
            } => Some(SurfaceKind::Torus {
                center,
                major,
                minor: minor + t,
            }),
            SurfaceKind::Ellipsoid { .. } => None,
        }
    }

    fn center_vector(&self) -> Vector<3> {
        let c = match *self {
            SurfaceKind::Sphere { center, .. } => center,
            SurfaceKind::Ellipsoid { center, .. } => center,
            SurfaceKind::Torus { center, .. } => center,
        };
        Vector::new(c)
    }

    fn build_level_set(&self) -> LevelSet<3> {
        let c = self.center_vector();
        match *self {
            SurfaceKind::Sphere { radius, .. } => LevelSet::sphere(c, radius),
            SurfaceKind::Ellipsoid { semi_axes, .. } => LevelSet::ellipsoid(c, semi_axes),
            SurfaceKind::Torus { major, minor, .. } => LevelSet::torus(c, major, minor),
        }
    }

    fn build_charts(&self) -> Vec<Chart> {
        let c = self.center_vector();
        match *self {
            SurfaceKind::Sphere { radius, .. } => {
                vec![spheroid_chart(c, [radius, radius, radius])]
            }
            SurfaceKind::Ellipsoid { semi_axes, .. } => vec![spheroid_chart(c, semi_axes)],
            SurfaceKind::Torus { major, minor, .. } => vec![torus_chart(c, major, minor)],
        }
    }
}

/// Polar chart of an axis-aligned ellipsoid (sphere when the axes agree):
/// `x = c + (a sin u cos v, b sin u sin v, c3 cos u)`, `u` the polar angle.
fn spheroid_chart(center: Vector<3>, axes: [f64; 3]) -> Chart {
    let [a, b, c3] = axes;
    let eval = move |u: f64, v: f64| {
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        ChartJet {
            point: center + Vector::new([a * su * cv, b * su * sv, c3 * cu]),
            du: Vector::new([a * cu * cv, b * cu * sv, -c3 * su]),
            dv: Vector::new([-a * su * sv, b * su * cv, 0.0]),
            duu: Vector::new([-a * su * cv, -b * su * sv, -c3 * cu]),
            duv: Vector::new([-a * cu * sv, b * cu * cv, 0.0]),
            dvv: Vector::new([-a * su * cv, -b * su * sv, 0.0]),
        }
    };
    Chart::new(Arc::new(eval), (0.0, PI), (0.0, TAU))
}

/// Chart of a torus around the `z`-axis: `u` runs around the hole, `v`
/// around the tube; `x = c + ((R + r cos v) cos u, (R + r cos v) sin u, r sin v)`.
fn torus_chart(center: Vector<3>, major: f64, minor: f64) -> Chart {
    let (rr, tr) = (major, minor);
    let eval = move |u: f64, v: f64| {
        let (su, cu) = u.sin_cos();
        let (sv, cv) = v.sin_cos();
        let ring = rr + tr * cv;
        ChartJet {
            point: center + Vector::new([ring * cu, ring * su, tr * sv]),
            du: Vector::new([-ring * su, ring * cu, 0.0]),
            dv: Vector::new([-tr * sv * cu, -tr * sv * su, tr * cv]),
            duu: Vector::new([-ring * cu, -ring * su, 0.0]),
            duv: Vector::new([tr * sv * su, -tr * sv * cu, 0.0]),
            dvv: Vector::new([-tr * cv * cu, -tr * cv * su, -tr * sv]),
        }
    };
    Chart::new(Arc::new(eval), (0.0, TAU), (0.0, TAU))
}

/// A built-in closed surface with both implicit and parametric descriptions.
#[derive(Clone)]
pub struct AnalyticSurface {
    kind: SurfaceKind,
    level_set: LevelSet<3>,
    charts: Vec<Chart>,
}

impl AnalyticSurface {
    pub fn from_kind(kind: SurfaceKind) -> Self {
        AnalyticSurface {
            kind,
            level_set: kind.build_level_set(),
            charts: kind.build_charts(),
        }
    }

    pub fn sphere(radius: f64) -> Self {
        Self::from_kind(SurfaceKind::sphere(radius))
    }

    pub fn ellipsoid(semi_axes: [f64; 3]) -> Self {
        Self::from_kind(SurfaceKind::ellipsoid(semi_axes))
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Self::from_kind(SurfaceKind::torus(major, minor))
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn level_set(&self) -> &LevelSet<3> {
        &self.level_set
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    /// Tensor-product Gauss–Legendre quadrature with `q` nodes per
    /// parameter direction, with normals, shape operators, and invariants
    /// evaluated from the level set at each node.
    pub fn quadrature(&self, q: usize) -> Result<Vec<QuadratureNode>> {
        let mut nodes = Vec::new();
        for (ci, chart) in self.charts.iter().enumerate() {
            let u_rule = gauss_legendre_on(chart.u_range.0, chart.u_range.1, q);
            let v_rule = gauss_legendre_on(chart.v_range.0, chart.v_range.1, q);
            for &(u, wu) in &u_rule {
                for &(v, wv) in &v_rule {
                    let jet = chart.jet(u, v);
                    let area = jet.du.cross(&jet.dv).norm();
                    let normal = self.level_set.normal_at(&jet.point)?;
                    let shape_operator = self.level_set.shape_operator_at(&jet.point)?;
                    let invariants = InvariantBundle::from_shape_operator(&shape_operator)?;
                    nodes.push(QuadratureNode {
                        point: jet.point,
                        weight: wu * wv * area,
                        normal,
                        shape_operator,
                        invariants,
                        chart: ci,
                        uv: (u, v),
                        gl_weight: wu * wv,
                    });
                }
            }
        }
        Ok(nodes)
    }

    /// Deterministic pseudo-random points on the surface (uniform in chart
    /// parameters, not in surface measure), away from chart edges.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<SurfacePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let chart_index = rng.gen_range(0..self.charts.len());
            let chart = &self.charts[chart_index];
            let margin_u = 0.05 * (chart.u_range.1 - chart.u_range.0);
            let margin_v = 0.05 * (chart.v_range.1 - chart.v_range.0);
            let u = rng.gen_range(chart.u_range.0 + margin_u..chart.u_range.1 - margin_u);
            let v = rng.gen_range(chart.v_range.0 + margin_v..chart.v_range.1 - margin_v);
            points.push(SurfacePoint {
                chart: chart_index,
                uv: (u, v),
                point: chart.point(u, v),
            });
        }
        points
    }

    /// Integrate a node function over the surface.
    pub fn integrate<F>(&self, q: usize, f: F) -> Result<f64>
    where
        F: Fn(&QuadratureNode) -> f64 + Send + Sync,
    {
        let nodes = self.quadrature(q)?;
        Ok(parallel_map_sum(&nodes, |node| node.weight * f(node)))
    }

    pub fn area(&self, q: usize) -> Result<f64> {
        self.integrate(q, |_| 1.0)
    }

    /// Enclosed volume via the divergence theorem: `(1/3) ∮ x · n dΓ`.
    pub fn volume(&self, q: usize) -> Result<f64> {
        self.integrate(q, |node| node.point.dot(&node.normal) / 3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: usize = 32;

    #[test]
    fn sphere_area_and_volume_are_exact_to_quadrature_precision() {
        for radius in [0.5, 1.0, 2.0] {
            let s = AnalyticSurface::sphere(radius);
            let area = s.area(Q).unwrap();
            let exact = 4.0 * PI * radius * radius;
            assert!((area - exact).abs() <= 1e-10 * exact, "area {area} vs {exact}");
            let vol = s.volume(Q).unwrap();
            let exact_v = 4.0 / 3.0 * PI * radius.powi(3);
            assert!((vol - exact_v).abs() <= 1e-10 * exact_v);
        }
    }

    #[test]
    fn torus_area_and_volume_match_closed_forms() {
        let (rr, tr) = (2.0, 0.8);
        let s = AnalyticSurface::torus(rr, tr);
        let area = s.area(Q).unwrap();
        let exact = 2.0 * TAU * PI * rr * tr; // 4 pi^2 R r
        assert!((area - exact).abs() <= 1e-10 * exact);
        let vol = s.volume(Q).unwrap();
        let exact_v = TAU * PI * rr * tr * tr; // 2 pi^2 R r^2
        assert!((vol - exact_v).abs() <= 1e-10 * exact_v);
    }

    #[test]
    fn ellipsoid_volume_matches_closed_form() {
        let axes = [1.0, 1.3, 0.7];
        let s = AnalyticSurface::ellipsoid(axes);
        let vol = s.volume(Q).unwrap();
        let exact = 4.0 / 3.0 * PI * axes[0] * axes[1] * axes[2];
        assert!((vol - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn gauss_curvature_integral_detects_the_topology() {
        // Sphere and ellipsoid: 4 pi. Torus: 0.
        for s in [
            AnalyticSurface::sphere(1.0),
            AnalyticSurface::sphere(2.0),
            AnalyticSurface::ellipsoid([1.0, 1.3, 0.7]),
        ] {
            let total = s
                .integrate(Q, |n| n.invariants.gauss_curvature(3))
                .unwrap();
            assert!((total - 4.0 * PI).abs() <= 1e-7, "{total}");
        }
        let torus = AnalyticSurface::torus(2.0, 1.0);
        let total = torus
            .integrate(Q, |n| n.invariants.gauss_curvature(3))
            .unwrap();
        assert!(total.abs() <= 1e-8, "{total}");
    }

    #[test]
    fn total_mean_curvature_of_the_sphere() {
        let radius = 1.7;
        let s = AnalyticSurface::sphere(radius);
        let total = s
            .integrate(Q, |n| n.invariants.total_mean_curvature())
            .unwrap();
        assert!((total - 8.0 * PI * radius).abs() <= 1e-9 * radius);
    }

    #[test]
    fn quadrature_nodes_sit_on_the_surface_with_consistent_normals() {
        for s in [
            AnalyticSurface::torus(2.0, 1.0),
            AnalyticSurface::ellipsoid([1.0, 1.3, 0.7]),
        ] {
            for node in s.quadrature(8).unwrap() {
                s.level_set().check_on_surface(&node.point, 1e-10).unwrap();
                let chart = &s.charts()[node.chart];
                let chart_normal = chart.normal(node.uv.0, node.uv.1);
                assert!(
                    (chart_normal - node.normal).norm() <= 1e-10,
                    "chart and level-set normals disagree"
                );
            }
        }
    }

    #[test]
    fn torus_nodes_match_closed_form_curvatures() {
        let (rr, tr) = (2.0, 1.0);
        let s = AnalyticSurface::torus(rr, tr);
        for node in s.quadrature(8).unwrap() {
            let v = node.uv.1;
            let kappa = 1.0 / tr + v.cos() / (rr + tr * v.cos());
            let gauss = v.cos() / (tr * (rr + tr * v.cos()));
            assert!((node.invariants.total_mean_curvature() - kappa).abs() <= 1e-11);
            assert!((node.invariants.gauss_curvature(3) - gauss).abs() <= 1e-11);
        }
    }

    #[test]
    fn sampled_points_are_reproducible_and_on_surface() {
        let s = AnalyticSurface::ellipsoid([1.0, 1.3, 0.7]);
        let a = s.sample_points(20, 42);
        let b = s.sample_points(20, 42);
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.point.0, q.point.0);
            s.level_set().check_on_surface(&p.point, 1e-10).unwrap();
        }
        let c = s.sample_points(20, 43);
        assert!(a.iter().zip(&c).any(|(p, q)| p.point.0 != q.point.0));
    }

    #[test]
    fn kind_transforms_stay_consistent_with_their_level_sets() {
        let kind = SurfaceKind::torus(2.0, 1.0);
        let dilated = AnalyticSurface::from_kind(kind.dilated(1.5));
        assert!(dilated.level_set().phi(&Vector::new([4.5, 0.0, 0.0])).abs() <= 1e-12);
        let shifted = AnalyticSurface::from_kind(kind.translated([0.0, 0.0, 3.0]));
        assert!(shifted.level_set().phi(&Vector::new([3.0, 0.0, 3.0])).abs() <= 1e-12);
        let offset = AnalyticSurface::from_kind(kind.normal_offset(0.25).unwrap());
        assert!(offset.level_set().phi(&Vector::new([3.25, 0.0, 0.0])).abs() <= 1e-9);
        assert!(SurfaceKind::ellipsoid([1.0, 1.3, 0.7]).normal_offset(0.1).is_none());
        // Dilating a sphere of radius 2 about the origin scales its area.
        let s2 = AnalyticSurface::from_kind(SurfaceKind::sphere(2.0).dilated(0.5));
        assert!((s2.area(16).unwrap() - 4.0 * PI).abs() <= 1e-9);
    }
}
