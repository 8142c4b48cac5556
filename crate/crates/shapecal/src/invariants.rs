//! Scalar invariants of the shape operator.
//!
//! For a symmetric tensor `S` the trace powers are `I_p = tr(S^p)` and the
//! elementary symmetric invariants `i_p` (sums of `p`-fold products of
//! eigenvalues) follow from Newton's identities. On a hypersurface, with `S`
//! the Weingarten map: `i_1` is the total (additive) mean curvature and the
//! top invariant `i_{N-1}` is the Gauss curvature, the product of the
//! principal curvatures — `i_2` for a surface in 3-space.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Relative skew tolerance beyond which a tensor is rejected as asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Trace powers `[I_1, ..., I_max_power]` of a symmetric tensor.
///
/// Errors if the input's skew part exceeds [`SYMMETRY_TOL`] relative to its
/// magnitude: invariants of a visibly asymmetric "shape operator" indicate a
/// bug upstream, not data to be averaged away.
pub fn trace_powers<const N: usize>(s: &Tensor<N>, max_power: usize) -> Result<Vec<f64>> {
    let skew = s.skew_norm();
    let tolerance = SYMMETRY_TOL * s.norm().max(1.0);
    if skew > tolerance {
        return Err(Error::AsymmetricTensor { skew, tolerance });
    }
    let mut powers = Vec::with_capacity(max_power);
    let mut acc = *s;
    for _ in 0..max_power {
        powers.push(acc.trace());
        acc = acc.compose(s);
    }
    Ok(powers)
}

/// Elementary symmetric invariants `[i_1, ..., i_k]` from trace powers
/// `[I_1, ..., I_k]`, via Newton's identities
/// `p i_p = sum_{j=1..p} (-1)^{j-1} i_{p-j} I_j` (with `i_0 = 1`).
pub fn elementary_from_traces(traces: &[f64]) -> Vec<f64> {
    let mut elem: Vec<f64> = Vec::with_capacity(traces.len());
    for p in 1..=traces.len() {
        let mut acc = 0.0;
        for j in 1..=p {
            let prev = if p == j { 1.0 } else { elem[p - j - 1] };
            let signed = if j % 2 == 1 { prev } else { -prev };
            acc += signed * traces[j - 1];
        }
        elem.push(acc / p as f64);
    }
    elem
}

/// Trace powers and elementary symmetric invariants of a shape operator,
/// up to order four.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantBundle {
    /// `traces[p-1] = I_p = tr(S^p)`.
    pub traces: [f64; 4],
    /// `elementary[p-1] = i_p`.
    pub elementary: [f64; 4],
}

impl InvariantBundle {
    /// Compute both families from a (symmetric) shape operator.
    pub fn from_shape_operator<const N: usize>(s: &Tensor<N>) -> Result<Self> {
        let traces = trace_powers(s, 4)?;
        let elementary = elementary_from_traces(&traces);
        Ok(InvariantBundle {
            traces: [traces[0], traces[1], traces[2], traces[3]],
            elementary: [elementary[0], elementary[1], elementary[2], elementary[3]],
        })
    }

    /// Total (additive) mean curvature `kappa = i_1 = I_1`.
    pub fn total_mean_curvature(&self) -> f64 {
        self.elementary[0]
    }

    /// Gauss curvature: the product of the principal curvatures, i.e. the
    /// top nonvanishing elementary invariant `i_{N-1}` of the Weingarten map
    /// of a hypersurface in `R^N`.
    pub fn gauss_curvature(&self, ambient_dim: usize) -> f64 {
        debug_assert!((2..=5).contains(&ambient_dim));
        self.elementary[ambient_dim - 2]
    }

    /// `I_p` for `p` in `1..=4`.
    pub fn trace_power(&self, p: usize) -> f64 {
        self.traces[p - 1]
    }

    /// `i_p` for `p` in `1..=4`.
    pub fn elementary_invariant(&self, p: usize) -> f64 {
        self.elementary[p - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{outer, Vector};
    use proptest::prelude::*;

    fn diag3(a: f64, b: f64, c: f64) -> Tensor<3> {
        let mut t = Tensor::zero();
        t[(0, 0)] = a;
        t[(1, 1)] = b;
        t[(2, 2)] = c;
        t
    }

    #[test]
    fn closed_forms_match_newton_identities() {
        let s = diag3(0.7, -1.3, 2.1);
        let b = InvariantBundle::from_shape_operator(&s).unwrap();
        let [i1, i2, i3, i4] = b.traces;
        assert!((b.elementary[0] - i1).abs() <= 1e-12);
        assert!((b.elementary[1] - (i1 * i1 - i2) / 2.0).abs() <= 1e-12);
        assert!((b.elementary[2] - (i1.powi(3) - 3.0 * i1 * i2 + 2.0 * i3) / 6.0).abs() <= 1e-12);
        let e4 = (i1.powi(4) - 6.0 * i1 * i1 * i2 + 3.0 * i2 * i2 + 8.0 * i1 * i3 - 6.0 * i4) / 24.0;
        assert!((b.elementary[3] - e4).abs() <= 1e-12);
    }

    #[test]
    fn eigenvalue_truth_for_diagonal_tensors() {
        let (a, b, c) = (0.5, 2.0, -1.0);
        let bundle = InvariantBundle::from_shape_operator(&diag3(a, b, c)).unwrap();
        assert!((bundle.elementary[0] - (a + b + c)).abs() <= 1e-12);
        assert!((bundle.elementary[1] - (a * b + b * c + a * c)).abs() <= 1e-12);
        assert!((bundle.elementary[2] - a * b * c).abs() <= 1e-12);
        assert!(bundle.elementary[3].abs() <= 1e-12);
        assert!((bundle.traces[2] - (a.powi(3) + b.powi(3) + c.powi(3))).abs() <= 1e-12);
    }

    #[test]
    fn weingarten_rank_deficiency_kills_top_invariants() {
        // A shape operator in 3-space has the normal in its kernel, so the
        // third and fourth elementary invariants vanish identically.
        let n = Vector::new([0.6, 0.0, 0.8]);
        let t1 = Vector::new([0.8, 0.0, -0.6]);
        let t2 = Vector::new([0.0, 1.0, 0.0]);
        let s = outer(&t1, &t1) * 0.9 + outer(&t2, &t2) * (-1.7);
        assert!(s.apply(&n).norm() <= 1e-12);
        let b = InvariantBundle::from_shape_operator(&s).unwrap();
        assert!(b.elementary[2].abs() <= 1e-12);
        assert!(b.elementary[3].abs() <= 1e-12);
        assert!((b.gauss_curvature(3) - (0.9 * -1.7)).abs() <= 1e-12);
        assert!((b.total_mean_curvature() - (0.9 - 1.7)).abs() <= 1e-12);
    }

    #[test]
    fn plane_curve_invariants() {
        let mut s = Tensor::<2>::zero();
        s[(0, 0)] = 0.25;
        let b = trace_powers(&s, 2).unwrap();
        let e = elementary_from_traces(&b);
        assert!((e[0] - 0.25).abs() <= 1e-15);
        assert!(e[1].abs() <= 1e-15);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut s = diag3(1.0, 2.0, 3.0);
        s[(0, 1)] = 1e-3;
        assert!(matches!(
            trace_powers(&s, 4),
            Err(Error::AsymmetricTensor { .. })
        ));
    }

    use crate::Error;

    proptest! {
        #[test]
        fn characteristic_polynomial_matches_invariants(
            d in proptest::array::uniform3(-3.0f64..3.0),
            q in proptest::array::uniform3(-1.0f64..1.0),
            lambda in -4.0f64..4.0,
        ) {
            // Build a random symmetric tensor with a crude rotation-ish
            // conjugation to leave the diagonal basis.
            let v = Vector::new(q);
            let axis = if v.norm() < 1e-3 { Vector::basis(0) } else { v.normalized() };
            let p = Tensor::projector(&axis);
            let base = diag3(d[0], d[1], d[2]);
            let s = p.compose(&base).compose(&p).symmetric_part();
            let b = InvariantBundle::from_shape_operator(&s).unwrap();
            let [i1, i2, i3, _] = b.elementary;
            let char_poly = (Tensor::identity() * lambda - s).det();
            let expansion = lambda.powi(3) - i1 * lambda * lambda + i2 * lambda - i3;
            let scale = 1.0 + lambda.abs().powi(3) + s.norm().powi(3);
            prop_assert!((char_poly - expansion).abs() <= 1e-11 * scale);
        }

        #[test]
        fn cayley_hamilton_holds(
            d in proptest::array::uniform3(-2.0f64..2.0),
            q in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let v = Vector::new(q);
            let axis = if v.norm() < 1e-3 { Vector::basis(2) } else { v.normalized() };
            let p = Tensor::projector(&axis);
            let s = p.compose(&diag3(d[0], d[1], d[2])).compose(&p).symmetric_part();
            let b = InvariantBundle::from_shape_operator(&s).unwrap();
            let [i1, i2, i3, _] = b.elementary;
            let residual = s.power(3) - s.power(2) * i1 + s * i2 - Tensor::identity() * i3;
            prop_assert!(residual.norm() <= 1e-11 * (1.0 + s.norm().powi(3)));
        }
    }
}
