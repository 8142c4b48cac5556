//! Fixed-size vectors and second-order tensors in ambient dimension `N`.
//!
//! Everything the crate computes — normals, Weingarten maps, tangential
//! jacobians — lives in plain stack arrays. `N` is a const parameter and
//! defaults to 3; `N = 2` is supported for plane curves. The operations are
//! exactly the contractions the tangential-calculus identities are written
//! in: outer products `u ⊗ v`, compositions `S T`, Frobenius pairings
//! `S : T = tr(S^T T)`, traces, and application to vectors.

use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// A vector in ambient dimension `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<const N: usize = 3>(pub [f64; N]);

/// A second-order tensor (square matrix) in ambient dimension `N`,
/// stored row-major: `t[(i, j)]` is the entry in row `i`, column `j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor<const N: usize = 3>(pub [[f64; N]; N]);

impl<const N: usize> Vector<N> {
    pub const fn new(components: [f64; N]) -> Self {
        Vector(components)
    }

    pub fn zero() -> Self {
        Vector([0.0; N])
    }

    /// The `i`-th canonical basis vector.
    pub fn basis(i: usize) -> Self {
        let mut v = [0.0; N];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            s += self.0[i] * other.0[i];
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// `self / |self|`. The caller is responsible for `|self| > 0`.
    pub fn normalized(&self) -> Self {
        *self / self.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Largest absolute component.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

impl Vector<3> {
    pub fn cross(&self, other: &Self) -> Self {
        let a = &self.0;
        let b = &other.0;
        Vector([
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }
}

/// Outer product `u ⊗ v`, the tensor with entries `u_i v_j`.
pub fn outer<const N: usize>(u: &Vector<N>, v: &Vector<N>) -> Tensor<N> {
    let mut t = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            t[i][j] = u.0[i] * v.0[j];
        }
    }
    Tensor(t)
}

impl<const N: usize> Tensor<N> {
    pub const fn new(rows: [[f64; N]; N]) -> Self {
        Tensor(rows)
    }

    pub fn zero() -> Self {
        Tensor([[0.0; N]; N])
    }

    pub fn identity() -> Self {
        let mut t = [[0.0; N]; N];
        for i in 0..N {
            t[i][i] = 1.0;
        }
        Tensor(t)
    }

    /// Orthogonal projector `I - n ⊗ n` onto the plane normal to the unit
    /// vector `n`.
    pub fn projector(n: &Vector<N>) -> Self {
        Self::identity() - outer(n, n)
    }

    /// Matrix–vector application `T v`.
    pub fn apply(&self, v: &Vector<N>) -> Vector<N> {
        let mut out = [0.0; N];
        for i in 0..N {
            let mut s = 0.0;
            for j in 0..N {
                s += self.0[i][j] * v.0[j];
            }
            out[i] = s;
        }
        Vector(out)
    }

    /// Transposed application `T^t v`.
    pub fn apply_transpose(&self, v: &Vector<N>) -> Vector<N> {
        let mut out = [0.0; N];
        for j in 0..N {
            let mut s = 0.0;
            for i in 0..N {
                s += self.0[i][j] * v.0[i];
            }
            out[j] = s;
        }
        Vector(out)
    }

    /// Matrix–matrix composition `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut t = [[0.0; N]; N];
        for i in 0..N {
            for j in 0..N {
                let mut s = 0.0;
                for k in 0..N {
                    s += self.0[i][k] * other.0[k][j];
                }
                t[i][j] = s;
            }
        }
        Tensor(t)
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0.0; N]; N];
        for i in 0..N {
            for j in 0..N {
                t[i][j] = self.0[j][i];
            }
        }
        Tensor(t)
    }

    pub fn trace(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            s += self.0[i][i];
        }
        s
    }

    /// Frobenius pairing `self : other = tr(self^T other) = sum_ij a_ij b_ij`.
    pub fn frobenius(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    /// Frobenius norm `sqrt(self : self)`.
    pub fn norm(&self) -> f64 {
        self.frobenius(self).sqrt()
    }

    /// Largest absolute entry.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Symmetric part `(T + T^t) / 2`.
    pub fn symmetric_part(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    /// `|T - T^t|` in the Frobenius norm; zero iff `T` is symmetric.
    pub fn skew_norm(&self) -> f64 {
        (*self - self.transpose()).norm()
    }

    /// `self` raised to a small integer power by repeated composition;
    /// `power = 0` gives the identity.
    pub fn power(&self, power: usize) -> Self {
        let mut out = Self::identity();
        for _ in 0..power {
            out = out.compose(self);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.is_finite())
    }

    /// Determinant; implemented for `N <= 3`.
    pub fn det(&self) -> f64 {
        let a = &self.0;
        match N {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            3 => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
            _ => panic!("determinant implemented for N <= 3 only"),
        }
    }

    /// Solve `self · x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when the pivot collapses (singular matrix).
    pub fn solve(&self, b: &Vector<N>) -> Option<Vector<N>> {
        let mut m = self.0;
        let mut rhs = b.0;
        for col in 0..N {
            let pivot_row = (col..N)
                .max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs()))
                .unwrap();
            if m[pivot_row][col].abs() < 1e-300 {
                return None;
            }
            m.swap(col, pivot_row);
            rhs.swap(col, pivot_row);
            for row in (col + 1)..N {
                let f = m[row][col] / m[col][col];
                for k in col..N {
                    m[row][k] -= f * m[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let mut x = [0.0; N];
        for row in (0..N).rev() {
            let mut s = rhs[row];
            for k in (row + 1)..N {
                s -= m[row][k] * x[k];
            }
            x[row] = s / m[row][row];
        }
        Some(Vector(x))
    }
}

impl<const N: usize> Index<usize> for Vector<N> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const N: usize> IndexMut<usize> for Vector<N> {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const N: usize> Index<(usize, usize)> for Tensor<N> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Tensor<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

macro_rules! elementwise_binop {
    ($type:ident, $trait:ident, $method:ident, $op:tt) => {
        impl<const N: usize> $trait for $type<N> {
            type Output = Self;
            fn $method(mut self, rhs: Self) -> Self {
                self.components_mut()
                    .zip(rhs.components())
                    .for_each(|(a, b)| *a = *a $op b);
                self
            }
        }
    };
}

impl<const N: usize> Vector<N> {
    fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
    fn components_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.0.iter_mut()
    }
}

impl<const N: usize> Tensor<N> {
    fn components(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }
    fn components_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.0.iter_mut().flatten()
    }
}

elementwise_binop!(Vector, Add, add, +);
elementwise_binop!(Vector, Sub, sub, -);
elementwise_binop!(Tensor, Add, add, +);
elementwise_binop!(Tensor, Sub, sub, -);

macro_rules! scalar_ops {
    ($type:ident) => {
        impl<const N: usize> Mul<f64> for $type<N> {
            type Output = Self;
            fn mul(mut self, rhs: f64) -> Self {
                self.components_mut().for_each(|a| *a *= rhs);
                self
            }
        }
        impl<const N: usize> Mul<$type<N>> for f64 {
            type Output = $type<N>;
            fn mul(self, rhs: $type<N>) -> $type<N> {
                rhs * self
            }
        }
        impl<const N: usize> Div<f64> for $type<N> {
            type Output = Self;
            fn div(self, rhs: f64) -> Self {
                self * (1.0 / rhs)
            }
        }
        impl<const N: usize> Neg for $type<N> {
            type Output = Self;
            fn neg(self) -> Self {
                self * -1.0
            }
        }
        impl<const N: usize> AddAssign for $type<N> {
            fn add_assign(&mut self, rhs: Self) {
                *self = *self + rhs;
            }
        }
        impl<const N: usize> SubAssign for $type<N> {
            fn sub_assign(&mut self, rhs: Self) {
                *self = *self - rhs;
            }
        }
        impl<const N: usize> Default for $type<N> {
            fn default() -> Self {
                Self::zero()
            }
        }
    };
}

scalar_ops!(Vector);
scalar_ops!(Tensor);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-13;

    fn assert_close(a: f64, b: f64, tol: f64) {
        let scale = 1.0f64.max(a.abs()).max(b.abs());
        assert!(
            (a - b).abs() <= tol * scale,
            "expected {a} ~ {b} (tol {tol})"
        );
    }

    fn assert_vectors_close<const N: usize>(a: &Vector<N>, b: &Vector<N>, tol: f64) {
        assert!((*a - *b).norm() <= tol * (1.0 + a.norm() + b.norm()), "{a:?} vs {b:?}");
    }

    #[test]
    fn outer_product_applies_as_projection_onto_left_factor() {
        let e1 = Vector::<3>::basis(0);
        let e2 = Vector::<3>::basis(1);
        assert_eq!(outer(&e1, &e2).apply(&e2), e1);
        assert_eq!(outer(&e1, &e2).apply(&e1), Vector::zero());
    }

    #[test]
    fn trace_of_outer_product_is_dot_product() {
        let u = Vector::new([1.0, -2.0, 0.5]);
        let v = Vector::new([3.0, 0.25, -1.0]);
        assert_close(outer(&u, &v).trace(), u.dot(&v), TOL);
    }

    #[test]
    fn frobenius_with_identity_is_trace() {
        let s = Tensor::new([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        assert_close(Tensor::identity().frobenius(&s), s.trace(), TOL);
    }

    #[test]
    fn frobenius_of_two_outer_products_factorizes() {
        let a = Vector::new([1.0, 0.5, -2.0]);
        let b = Vector::new([0.0, 3.0, 1.0]);
        let u = Vector::new([-1.0, 1.0, 4.0]);
        let v = Vector::new([2.0, -0.5, 0.25]);
        assert_close(
            outer(&a, &b).frobenius(&outer(&u, &v)),
            a.dot(&u) * b.dot(&v),
            TOL,
        );
    }

    #[test]
    fn projector_is_idempotent_and_annihilates_the_normal() {
        let n = Vector::new([1.0, 2.0, -2.0]).normalized();
        let p = Tensor::projector(&n);
        assert!((p.compose(&p) - p).norm() <= TOL);
        assert!(p.apply(&n).norm() <= TOL);
        assert_close(p.trace(), 2.0, TOL);
    }

    #[test]
    fn solve_inverts_application() {
        let t = Tensor::new([[2.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.5, 0.0, 1.0]]);
        let x = Vector::new([0.3, -1.2, 2.0]);
        let b = t.apply(&x);
        assert_vectors_close(&t.solve(&b).unwrap(), &x, 1e-12);
        assert!(Tensor::<3>::zero().solve(&b).is_none());
    }

    #[test]
    fn determinant_matches_eigenvalue_products_in_2d_and_3d() {
        let d2 = Tensor::<2>::new([[3.0, 0.0], [0.0, 0.5]]);
        assert_close(d2.det(), 1.5, TOL);
        let d3 = Tensor::<3>::new([[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 4.0]]);
        assert_close(d3.det(), -8.0, TOL);
    }

    #[test]
    fn power_zero_is_identity() {
        let s = Tensor::new([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0], [3.0, 0.0, 2.0]]);
        assert_eq!(s.power(0), Tensor::identity());
        assert_eq!(s.power(1), s);
        assert!((s.power(3) - s.compose(&s).compose(&s)).norm() <= TOL * s.norm().powi(3));
    }

    fn small_vec() -> impl Strategy<Value = Vector<3>> {
        prop::array::uniform3(-10.0f64..10.0).prop_map(Vector::new)
    }

    fn small_tensor() -> impl Strategy<Value = Tensor<3>> {
        prop::array::uniform3(prop::array::uniform3(-10.0f64..10.0)).prop_map(Tensor::new)
    }

    proptest! {
        /// S (u ⊗ v) = (S u) ⊗ v
        #[test]
        fn compose_with_outer_left(s in small_tensor(), u in small_vec(), v in small_vec()) {
            let lhs = s.compose(&outer(&u, &v));
            let rhs = outer(&s.apply(&u), &v);
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
        }

        /// (u ⊗ v) S = u ⊗ (S^t v)
        #[test]
        fn compose_with_outer_right(s in small_tensor(), u in small_vec(), v in small_vec()) {
            let lhs = outer(&u, &v).compose(&s);
            let rhs = outer(&u, &s.apply_transpose(&v));
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
        }

        /// S T : P = S : P T^t = T : S^t P
        #[test]
        fn frobenius_cycling(s in small_tensor(), t in small_tensor(), p in small_tensor()) {
            let a = s.compose(&t).frobenius(&p);
            let b = s.frobenius(&p.compose(&t.transpose()));
            let c = t.frobenius(&s.transpose().compose(&p));
            let scale = 1.0 + a.abs();
            prop_assert!((a - b).abs() <= 1e-9 * scale);
            prop_assert!((a - c).abs() <= 1e-9 * scale);
        }

        /// S : (u ⊗ v) = u · (S v)
        #[test]
        fn frobenius_against_outer(s in small_tensor(), u in small_vec(), v in small_vec()) {
            let lhs = s.frobenius(&outer(&u, &v));
            let rhs = u.dot(&s.apply(&v));
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }

        /// For symmetric S: S : T = S : T^t
        #[test]
        fn symmetric_pairing_ignores_transpose(s in small_tensor(), t in small_tensor()) {
            let sym = s.symmetric_part();
            let lhs = sym.frobenius(&t);
            let rhs = sym.frobenius(&t.transpose());
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn two_dimensional_algebra_works_the_same_way() {
        let u = Vector::<2>::new([1.0, 2.0]);
        let v = Vector::<2>::new([-0.5, 3.0]);
        assert_close(outer(&u, &v).trace(), u.dot(&v), TOL);
        let n = Vector::<2>::new([0.6, 0.8]);
        let p = Tensor::projector(&n);
        assert_close(p.trace(), 1.0, TOL);
        assert!(p.apply(&n).norm() <= TOL);
    }
}
