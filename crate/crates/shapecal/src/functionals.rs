//! Surface functionals and their first shape derivatives.
//!
//! Every functional here is `J(Γ) = ∮_Γ z dΓ` for a curvature integrand
//! `z`; its shape derivative under a deformation with normal speed `v` is
//! `dJ = ∮ z' + kappa z v`, which depends on the velocity only through `v`.
//! Integrands:
//!
//! * area: `z = 1`
//! * Willmore (bending) energy: `z = kappa^2 / 2`
//! * spontaneous-curvature energy: `z = (kappa - kappa_0)^2 / 2`
//! * total Gauss curvature: `z = kappa_g` (a topological invariant, so its
//!   derivative vanishes identically — a sharp test of the formulas)

use serde::{Deserialize, Serialize};

use crate::field::ScalarField;
use crate::surface::{AnalyticSurface, QuadratureNode};
use crate::tangential::{laplace_beltrami, second_tangential};
use crate::Result;

/// Which functional to evaluate or differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum FunctionalKind {
    Area,
    Willmore,
    SpontaneousCurvature { kappa0: f64 },
    TotalGauss,
}

impl FunctionalKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionalKind::Area => "area",
            FunctionalKind::Willmore => "willmore",
            FunctionalKind::SpontaneousCurvature { .. } => "spontaneous_curvature",
            FunctionalKind::TotalGauss => "total_gauss",
        }
    }

    /// The integrand as a pointwise function of the total mean curvature
    /// `kappa` and the Gauss curvature. This is the single definition shared
    /// by analytic quadrature and mesh evaluation.
    pub fn density(&self, kappa: f64, gauss: f64) -> f64 {
        match *self {
            FunctionalKind::Area => 1.0,
            FunctionalKind::Willmore => 0.5 * kappa * kappa,
            FunctionalKind::SpontaneousCurvature { kappa0 } => {
                0.5 * (kappa - kappa0) * (kappa - kappa0)
            }
            FunctionalKind::TotalGauss => gauss,
        }
    }

    /// The integrand at a quadrature node.
    pub fn integrand(&self, node: &QuadratureNode) -> f64 {
        self.density(
            node.invariants.total_mean_curvature(),
            node.invariants.gauss_curvature(3),
        )
    }

    /// `J(Γ)` by surface quadrature with `q` nodes per direction.
    pub fn value(&self, surface: &AnalyticSurface, q: usize) -> Result<f64> {
        surface.integrate(q, |node| self.integrand(node))
    }

    /// First shape derivative `dJ = ∮ z' + kappa z v` for a deformation
    /// with normal speed `vn` (a scalar extension field carrying hessians).
    pub fn derivative_for_normal_speed(
        &self,
        surface: &AnalyticSurface,
        vn: &ScalarField<3>,
        q: usize,
    ) -> Result<f64> {
        let ls = surface.level_set().clone();
        let kind = *self;
        surface.integrate(q, move |node| {
            let kappa = node.invariants.total_mean_curvature();
            let v = vn.value(&node.point);
            match kind {
                FunctionalKind::Area => kappa * v,
                FunctionalKind::Willmore => {
                    // z' = kappa kappa' with kappa' = -lap_Γ v - I_2 v.
                    let i2 = node.invariants.trace_power(2);
                    let lap_v = laplace_beltrami(&ls, vn, &node.point).unwrap();
                    kappa * (-lap_v - i2 * v) + kappa * (0.5 * kappa * kappa) * v
                }
                FunctionalKind::SpontaneousCurvature { kappa0 } => {
                    let i2 = node.invariants.trace_power(2);
                    let lap_v = laplace_beltrami(&ls, vn, &node.point).unwrap();
                    let excess = kappa - kappa0;
                    excess * (-lap_v - i2 * v) + kappa * (0.5 * excess * excess) * v
                }
                FunctionalKind::TotalGauss => {
                    // z' = -kappa lap_Γ v + D^2_Γ v : S - v kappa kappa_g.
                    let kappa_g = node.invariants.gauss_curvature(3);
                    let lap_v = laplace_beltrami(&ls, vn, &node.point).unwrap();
                    let d2v = second_tangential(&ls, vn, &node.point).unwrap();
                    -kappa * lap_v + d2v.frobenius(&node.shape_operator)
                        - v * kappa * kappa_g
                        + kappa * kappa_g * v
                }
            }
        })
    }
}
