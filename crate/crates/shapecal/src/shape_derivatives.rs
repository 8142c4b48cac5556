//! Shape derivatives of geometric quantities under a normal velocity.
//!
//! A deforming surface with scalar normal speed `v` (the normal component
//! of the deformation velocity) changes its geometry at first order as
//!
//! * normal: `n' = -grad_Γ v`
//! * Weingarten map: `S' = -D^2_Γ v + (S grad_Γ v) ⊗ n - v S^2`
//! * total mean curvature: `kappa' = -lap_Γ v - I_2 v`
//! * trace powers: `I_p' = -p (D^2_Γ v : S^{p-1} + v I_{p+1})`
//! * Gauss curvature (surfaces in 3-space):
//!   `kappa_g' = -kappa lap_Γ v + D^2_Γ v : S - v kappa kappa_g`
//!
//! and quantities transported with the surface (restrictions of fixed
//! ambient fields, or externally supplied families `z(t)`) obey transport
//! rules whose extra terms are all built from `grad_Γ v`, `D^2_Γ v`, and the
//! curvature. Shape derivatives here are local (Eulerian) derivatives: the
//! derivative following the material point minus tangential convection, so
//! they depend on the velocity only through its normal component.
//!
//! Every function takes the normal speed as a scalar extension field; where
//! second tangential derivatives of `v` appear the field must carry
//! hessians, and `lap_Γ`-of-curvature terms additionally need third
//! derivatives of the level set.

use crate::field::{ScalarField, VectorField};
use crate::invariants::InvariantBundle;
use crate::levelset::LevelSet;
use crate::tangential::{
    curvature_gradient, laplace_beltrami, second_tangential, tangential_divergence,
    tangential_gradient, tangential_jacobian,
};
use crate::tensor::{outer, Tensor, Vector};
use crate::Result;

/// `b' = -v`: the signed distance to the moving surface decreases at the
/// normal speed.
pub fn signed_distance_prime<const N: usize>(
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> f64 {
    -vn.value(x)
}

/// `n' = -grad_Γ v`.
pub fn normal_prime<const N: usize>(
    ls: &LevelSet<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    Ok(-tangential_gradient(ls, vn, x)?)
}

/// `S' = -D^2_Γ v + (S grad_Γ v) ⊗ n - v S^2` for the Weingarten map `S`.
pub fn weingarten_prime<const N: usize>(
    ls: &LevelSet<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<Tensor<N>> {
    let s = ls.shape_operator_at(x)?;
    let n = ls.normal_at(x)?;
    let grad_v = tangential_gradient(ls, vn, x)?;
    let d2v = second_tangential(ls, vn, x)?;
    Ok(-d2v + outer(&s.apply(&grad_v), &n) - s.compose(&s) * vn.value(x))
}

/// `kappa' = -lap_Γ v - I_2 v` (total mean curvature).
pub fn curvature_prime<const N: usize>(
    ls: &LevelSet<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let s = ls.shape_operator_at(x)?;
    let i2 = s.compose(&s).trace();
    Ok(-laplace_beltrami(ls, vn, x)? - i2 * vn.value(x))
}

/// `I_p' = -p (D^2_Γ v : S^{p-1} + v I_{p+1})` for the trace powers
/// `I_p = tr(S^p)`, `p >= 1` (with `S^0 = I`).
pub fn trace_power_prime<const N: usize>(
    ls: &LevelSet<N>,
    vn: &ScalarField<N>,
    p: usize,
    x: &Vector<N>,
) -> Result<f64> {
    assert!(p >= 1, "trace powers start at p = 1");
    let s = ls.shape_operator_at(x)?;
    let d2v = second_tangential(ls, vn, x)?;
    let s_pm1 = s.power(p - 1);
    let i_p1 = s.power(p + 1).trace();
    Ok(-(p as f64) * (d2v.frobenius(&s_pm1) + vn.value(x) * i_p1))
}

/// `i_1' = -lap_Γ v - i_1^2 v + 2 i_2 v`: the total mean curvature
/// derivative rewritten through elementary invariants.
pub fn elementary_first_prime<const N: usize>(
    ls: &LevelSet<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let b = InvariantBundle::from_shape_operator(&ls.shape_operator_at(x)?)?;
    let v = vn.value(x);
    let i1 = b.elementary_invariant(1);
    let i2 = b.elementary_invariant(2);
    Ok(-laplace_beltrami(ls, vn, x)? - i1 * i1 * v + 2.0 * i2 * v)
}

/// `i_2' = -i_1 lap_Γ v + D^2_Γ v : S + v (3 i_3 - i_1 i_2)`.
pub fn elementary_second_prime<const N: usize>(
    ls: &LevelSet<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let s = ls.shape_operator_at(x)?;
    let b = InvariantBundle::from_shape_operator(&s)?;
    let v = vn.value(x);
    let (i1, i2, i3) = (
        b.elementary_invariant(1),
        b.elementary_invariant(2),
        b.elementary_invariant(3),
    );
    Ok(-i1 * laplace_beltrami(ls, vn, x)?
        + second_tangential(ls, vn, x)?.frobenius(&s)
        + v * (3.0 * i3 - i1 * i2))
}

/// Gauss curvature derivative for a surface in 3-space:
/// `kappa_g' = -kappa lap_Γ v + D^2_Γ v : S - v kappa kappa_g`.
pub fn gauss_curvature_prime(
    ls: &LevelSet<3>,
    vn: &ScalarField<3>,
    x: &Vector<3>,
) -> Result<f64> {
    let s = ls.shape_operator_at(x)?;
    let b = InvariantBundle::from_shape_operator(&s)?;
    let kappa = b.total_mean_curvature();
    let kappa_g = b.gauss_curvature(3);
    Ok(-kappa * laplace_beltrami(ls, vn, x)?
        + second_tangential(ls, vn, x)?.frobenius(&s)
        - vn.value(x) * kappa * kappa_g)
}

/// `z' = (dPhi/dn) v` for the restriction of a fixed ambient function:
/// the surface slides through the frozen field at the normal speed.
/// `grad_phi` is the ambient gradient of the function.
pub fn restriction_prime<const N: usize>(
    ls: &LevelSet<N>,
    grad_phi: &VectorField<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    Ok(grad_phi.value(x).dot(&ls.normal_at(x)?) * vn.value(x))
}

/// [`restriction_prime`] as a field: `z' = (grad Phi · n) v`, with as many
/// derivatives as the inputs provide (hessians require second derivatives
/// of `grad_phi` and third derivatives of the level set).
pub fn restriction_prime_field<const N: usize>(
    ls: &LevelSet<N>,
    grad_phi: &VectorField<N>,
    vn: &ScalarField<N>,
) -> ScalarField<N> {
    grad_phi.dot(&ls.normal_field()).product(vn)
}

/// `w' = (Dw n) v` componentwise, for the restriction of a fixed ambient
/// vector field. The jacobian of the result needs hessians of `w`.
pub fn vector_restriction_prime_field<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
    vn: &ScalarField<N>,
) -> VectorField<N> {
    let normal = ls.normal_field();
    let (w, vn) = (w.clone(), vn.clone());
    VectorField::from_jet_fn(move |x| {
        let wj = w.jet(x);
        let nj = normal.jet(x);
        let vj = vn.jet(x);
        let hess = wj
            .hessians
            .expect("vector_restriction_prime_field requires a field with hessians");
        let dwn = wj.jacobian.apply(&nj.value);
        let value = dwn * vj.value;
        let mut jacobian = Tensor::zero();
        for i in 0..N {
            for k in 0..N {
                // d_k (sum_j d_j w_i n_j) needs the hessian of w_i.
                let mut d_k_dwn_i = 0.0;
                for j in 0..N {
                    d_k_dwn_i += hess[i][(j, k)] * nj.value[j]
                        + wj.jacobian[(i, j)] * nj.jacobian[(j, k)];
                }
                jacobian[(i, k)] = d_k_dwn_i * vj.value + dwn[i] * vj.gradient[k];
            }
        }
        crate::field::VectorJet {
            value,
            jacobian,
            hessians: None,
        }
    })
}

/// `(grad_Γ z)' = grad_Γ z' + (n ⊗ grad_Γ v - v S) grad_Γ z` for a family
/// `z(t)` with local derivative `z'`.
pub fn tangential_gradient_prime<const N: usize>(
    ls: &LevelSet<N>,
    z: &ScalarField<N>,
    z_prime: &ScalarField<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    let n = ls.normal_at(x)?;
    let s = ls.shape_operator_at(x)?;
    let grad_v = tangential_gradient(ls, vn, x)?;
    let grad_z = tangential_gradient(ls, z, x)?;
    let correction = outer(&n, &grad_v) - s * vn.value(x);
    Ok(tangential_gradient(ls, z_prime, x)? + correction.apply(&grad_z))
}

/// `(D_Γ w)' = D_Γ w' + D_Γ w (grad_Γ v ⊗ n - v S)` for a vector family
/// `w(t)` with local derivative `w'`.
pub fn tangential_jacobian_prime<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
    w_prime: &VectorField<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<Tensor<N>> {
    let n = ls.normal_at(x)?;
    let s = ls.shape_operator_at(x)?;
    let grad_v = tangential_gradient(ls, vn, x)?;
    let correction = outer(&grad_v, &n) - s * vn.value(x);
    Ok(tangential_jacobian(ls, w_prime, x)?
        + tangential_jacobian(ls, w, x)?.compose(&correction))
}

/// `(div_Γ w)' = div_Γ w' + (n ⊗ grad_Γ v - v S) : D_Γ w`.
pub fn tangential_divergence_prime<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
    w_prime: &VectorField<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let n = ls.normal_at(x)?;
    let s = ls.shape_operator_at(x)?;
    let grad_v = tangential_gradient(ls, vn, x)?;
    let correction = outer(&n, &grad_v) - s * vn.value(x);
    Ok(tangential_divergence(ls, w_prime, x)?
        + correction.frobenius(&tangential_jacobian(ls, w, x)?))
}

/// `(lap_Γ z)' = lap_Γ z' - 2 v S : D^2_Γ z
///  + (kappa grad_Γ v - 2 S grad_Γ v - v grad_Γ kappa) · grad_Γ z`.
///
/// Needs third derivatives of the level set (for `grad_Γ kappa`) and
/// hessians of `z'`.
pub fn laplace_beltrami_prime<const N: usize>(
    ls: &LevelSet<N>,
    z: &ScalarField<N>,
    z_prime: &ScalarField<N>,
    vn: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let s = ls.shape_operator_at(x)?;
    let kappa = s.trace();
    let v = vn.value(x);
    let grad_v = tangential_gradient(ls, vn, x)?;
    let grad_z = tangential_gradient(ls, z, x)?;
    let d2z = second_tangential(ls, z, x)?;
    let grad_kappa = curvature_gradient(ls, x)?;
    let coeff = grad_v * kappa - s.apply(&grad_v) * 2.0 - grad_kappa * v;
    Ok(laplace_beltrami(ls, z_prime, x)? - 2.0 * v * s.frobenius(&d2z)
        + coeff.dot(&grad_z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Polynomial;
    use crate::surface::AnalyticSurface;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_speed<const N: usize>() -> ScalarField<N> {
        ScalarField::constant(1.0)
    }

    #[test]
    fn inflating_a_sphere_changes_curvatures_like_shrinking_the_radius() {
        // Under v = 1 the sphere of radius R becomes radius R + t, so
        // kappa = 2/R has derivative -2/R^2, I_2 = 2/R^2 has -4/R^3, and
        // kappa_g = 1/R^2 has -2/R^3.
        for radius in [0.5, 1.0, 2.0] {
            let surface = AnalyticSurface::sphere(radius);
            let ls = surface.level_set();
            let v = unit_speed();
            for sp in surface.sample_points(5, 1) {
                let x = sp.point;
                let kp = curvature_prime(ls, &v, &x).unwrap();
                assert!((kp + 2.0 / (radius * radius)).abs() <= 1e-10);
                let i2p = trace_power_prime(ls, &v, 2, &x).unwrap();
                assert!((i2p + 4.0 / radius.powi(3)).abs() <= 1e-10);
                let kgp = gauss_curvature_prime(ls, &v, &x).unwrap();
                assert!((kgp + 2.0 / radius.powi(3)).abs() <= 1e-10);
                assert!(normal_prime(ls, &v, &x).unwrap().norm() <= 1e-12);
                // The Weingarten derivative is -P/R^2 here.
                let sp_t = weingarten_prime(ls, &v, &x).unwrap();
                let n = ls.normal_at(&x).unwrap();
                let expected = crate::tensor::Tensor::projector(&n) * (-1.0 / (radius * radius));
                assert!((sp_t - expected).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn dilation_scales_gauss_curvature_at_rate_minus_two() {
        // Under v_n = x · n (the velocity x), kappa_g on a sphere of radius
        // R changes at -2/R^2.
        let radius = 1.3;
        let surface = AnalyticSurface::sphere(radius);
        let ls = surface.level_set();
        let vn = VectorField::position().dot(&ls.normal_field());
        for sp in surface.sample_points(5, 2) {
            let kgp = gauss_curvature_prime(ls, &vn, &sp.point).unwrap();
            assert!((kgp + 2.0 / (radius * radius)).abs() <= 1e-10, "{kgp}");
        }
    }

    #[test]
    fn translations_leave_pointwise_curvatures_unchanged_on_spheres() {
        let surface = AnalyticSurface::sphere(1.0);
        let ls = surface.level_set();
        for axis in 0..3 {
            let vn = VectorField::constant(Vector::basis(axis)).dot(&ls.normal_field());
            for sp in surface.sample_points(5, 3 + axis as u64) {
                let x = sp.point;
                assert!(curvature_prime(ls, &vn, &x).unwrap().abs() <= 1e-10);
                assert!(gauss_curvature_prime(ls, &vn, &x).unwrap().abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn translations_convect_curvature_on_a_torus() {
        // A translated surface has the same geometry at material points, so
        // the local derivative must be pure (negative) convection:
        // kappa' = -grad_Γ kappa · c.
        let surface = AnalyticSurface::torus(2.0, 1.0);
        let ls = surface.level_set();
        for axis in 0..3 {
            let c = Vector::basis(axis);
            let vn = VectorField::constant(c).dot(&ls.normal_field());
            for sp in surface.sample_points(8, 7 + axis as u64) {
                let x = sp.point;
                let kp = curvature_prime(ls, &vn, &x).unwrap();
                let expected = -curvature_gradient(ls, &x).unwrap().dot(&c);
                assert!((kp - expected).abs() <= 1e-9, "axis {axis}: {kp} vs {expected}");
            }
        }
    }

    #[test]
    fn invariant_derivative_formulas_agree_with_each_other() {
        let surface = AnalyticSurface::torus(2.0, 1.0);
        let ls = surface.level_set();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = VectorField::polynomial([
            Polynomial::random(2, 0.4, &mut rng),
            Polynomial::random(2, 0.4, &mut rng),
            Polynomial::random(2, 0.4, &mut rng),
        ]);
        let vn = w.dot(&ls.normal_field());
        for sp in surface.sample_points(15, 6) {
            let x = sp.point;
            // kappa' through traces and through elementary invariants.
            let a = curvature_prime(ls, &vn, &x).unwrap();
            let b = elementary_first_prime(ls, &vn, &x).unwrap();
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            // I_1' is kappa'.
            let c = trace_power_prime(ls, &vn, 1, &x).unwrap();
            assert!((a - c).abs() <= 1e-9);
            // kappa_g' = i_2' on a surface in 3-space.
            let d = gauss_curvature_prime(ls, &vn, &x).unwrap();
            let e = elementary_second_prime(ls, &vn, &x).unwrap();
            assert!((d - e).abs() <= 1e-9, "{d} vs {e}");
            // tr(S') = kappa'.
            let sp_t = weingarten_prime(ls, &vn, &x).unwrap();
            assert!((sp_t.trace() - a).abs() <= 1e-9);
        }
    }

    #[test]
    fn restriction_of_the_vertical_coordinate_on_the_unit_sphere() {
        // z = x_3 restricted to the unit sphere, inflated at unit speed:
        // z' = (dPhi/dn) v = n_3 = x_3, and the known closed forms
        // (grad_Γ z)' = 0 and (lap_Γ z)' = 2 x_3 follow.
        let surface = AnalyticSurface::sphere(1.0);
        let ls = surface.level_set();
        let phi = Polynomial::<3>::coordinate(2);
        let z = ScalarField::polynomial(phi.clone());
        let grad_phi = phi.gradient_field();
        let v = unit_speed();
        let z_prime = restriction_prime_field(ls, &grad_phi, &v);
        for spt in surface.sample_points(8, 8) {
            let x = spt.point;
            assert!((z_prime.value(&x) - x[2]).abs() <= 1e-12);
            let gp = tangential_gradient_prime(ls, &z, &z_prime, &v, &x).unwrap();
            assert!(gp.norm() <= 1e-10, "{:?}", gp.0);
            let lp = laplace_beltrami_prime(ls, &z, &z_prime, &v, &x).unwrap();
            assert!((lp - 2.0 * x[2]).abs() <= 1e-9, "{lp} vs {}", 2.0 * x[2]);
        }
    }

    #[test]
    fn divergence_prime_is_the_trace_of_the_jacobian_prime() {
        let surface = AnalyticSurface::torus(2.0, 1.0);
        let ls = surface.level_set();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = VectorField::polynomial([
            Polynomial::random(2, 0.4, &mut rng),
            Polynomial::random(2, 0.4, &mut rng),
            Polynomial::random(2, 0.4, &mut rng),
        ]);
        let vel = VectorField::polynomial([
            Polynomial::random(2, 0.3, &mut rng),
            Polynomial::random(2, 0.3, &mut rng),
            Polynomial::random(2, 0.3, &mut rng),
        ]);
        let vn = vel.dot(&ls.normal_field());
        let w_prime = vector_restriction_prime_field(ls, &w, &vn);
        for sp in surface.sample_points(12, 10) {
            let x = sp.point;
            let dp = tangential_divergence_prime(ls, &w, &w_prime, &vn, &x).unwrap();
            let jp = tangential_jacobian_prime(ls, &w, &w_prime, &vn, &x).unwrap();
            // D_Γ w' from the formula uses the *tangential* jacobian of w';
            // its trace is div_Γ w', so the two transport rules must agree.
            assert!((dp - jp.trace()).abs() <= 1e-9, "{dp} vs {}", jp.trace());
        }
    }
}
