//! Ambient fields that carry their own derivatives.
//!
//! A field here is a closure returning a *jet*: the value together with the
//! exact first derivative and, when available, the exact second derivative at
//! the evaluation point. Tangential operators consume jets, so every
//! closed-form identity in the crate can be tested without finite
//! differencing. Combinators (products, dot products, compositions with the
//! level-set normal) propagate derivatives by the usual calculus rules, and
//! [`Polynomial`] provides exact jets for randomized test fields.
//!
//! Second derivatives are optional: combinators propagate `None`, and
//! operators that need a hessian report [`Error::MissingHessian`] instead of
//! silently degrading.

use std::sync::Arc;

use crate::tensor::{outer, Tensor, Vector};
use crate::{Error, Result};

/// Value, gradient and optional hessian of a scalar field at a point.
#[derive(Clone, Copy, Debug)]
pub struct ScalarJet<const N: usize = 3> {
    pub value: f64,
    pub gradient: Vector<N>,
    pub hessian: Option<Tensor<N>>,
}

/// Value, jacobian and optional per-component hessians of a vector field.
/// `jacobian[(i, j)] = d w_i / d x_j`; `hessians[i]` is the hessian of the
/// `i`-th component.
#[derive(Clone, Copy, Debug)]
pub struct VectorJet<const N: usize = 3> {
    pub value: Vector<N>,
    pub jacobian: Tensor<N>,
    pub hessians: Option<[Tensor<N>; N]>,
}

/// Value and optional first derivatives of a tensor field.
/// `gradient[k]` is the entrywise partial derivative of the tensor in the
/// `k`-th coordinate direction.
#[derive(Clone, Copy, Debug)]
pub struct TensorJet<const N: usize = 3> {
    pub value: Tensor<N>,
    pub gradient: Option<[Tensor<N>; N]>,
}

impl<const N: usize> ScalarJet<N> {
    pub fn constant(value: f64) -> Self {
        ScalarJet {
            value,
            gradient: Vector::zero(),
            hessian: Some(Tensor::zero()),
        }
    }

    /// Product rule for `self * other`.
    pub fn product(&self, other: &Self) -> Self {
        let hessian = match (self.hessian, other.hessian) {
            (Some(a), Some(b)) => Some(
                a * other.value
                    + b * self.value
                    + outer(&self.gradient, &other.gradient)
                    + outer(&other.gradient, &self.gradient),
            ),
            _ => None,
        };
        ScalarJet {
            value: self.value * other.value,
            gradient: self.gradient * other.value + other.gradient * self.value,
            hessian,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        ScalarJet {
            value: self.value * factor,
            gradient: self.gradient * factor,
            hessian: self.hessian.map(|h| h * factor),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let hessian = match (self.hessian, other.hessian) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        ScalarJet {
            value: self.value + other.value,
            gradient: self.gradient + other.gradient,
            hessian,
        }
    }

    pub fn hessian(&self, what: &'static str) -> Result<Tensor<N>> {
        self.hessian.ok_or(Error::MissingHessian { what })
    }
}

impl<const N: usize> VectorJet<N> {
    pub fn constant(value: Vector<N>) -> Self {
        VectorJet {
            value,
            jacobian: Tensor::zero(),
            hessians: Some([Tensor::zero(); N]),
        }
    }

    /// Dot product of two vector jets, with exact derivative propagation.
    pub fn dot(&self, other: &Self) -> ScalarJet<N> {
        let gradient =
            self.jacobian.apply_transpose(&other.value) + other.jacobian.apply_transpose(&self.value);
        let hessian = match (self.hessians, other.hessians) {
            (Some(ha), Some(hb)) => {
                let mut h = self.jacobian.transpose().compose(&other.jacobian)
                    + other.jacobian.transpose().compose(&self.jacobian);
                for i in 0..N {
                    h += ha[i] * other.value[i] + hb[i] * self.value[i];
                }
                Some(h)
            }
            _ => None,
        };
        ScalarJet {
            value: self.value.dot(&other.value),
            gradient,
            hessian,
        }
    }

    /// Product of a scalar jet and a vector jet.
    pub fn scaled_by(&self, s: &ScalarJet<N>) -> Self {
        let jacobian = outer(&self.value, &s.gradient) + self.jacobian * s.value;
        let hessians = match (self.hessians, s.hessian) {
            (Some(hw), Some(hs)) => {
                let mut out = [Tensor::zero(); N];
                for i in 0..N {
                    let grad_wi = row(&self.jacobian, i);
                    out[i] = hs * self.value[i]
                        + hw[i] * s.value
                        + outer(&s.gradient, &grad_wi)
                        + outer(&grad_wi, &s.gradient);
                }
                Some(out)
            }
            _ => None,
        };
        VectorJet {
            value: self.value * s.value,
            jacobian,
            hessians,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let hessians = match (self.hessians, other.hessians) {
            (Some(a), Some(b)) => {
                let mut out = [Tensor::zero(); N];
                for i in 0..N {
                    out[i] = a[i] + b[i];
                }
                Some(out)
            }
            _ => None,
        };
        VectorJet {
            value: self.value + other.value,
            jacobian: self.jacobian + other.jacobian,
            hessians,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        VectorJet {
            value: self.value * factor,
            jacobian: self.jacobian * factor,
            hessians: self.hessians.map(|hs| hs.map(|h| h * factor)),
        }
    }

    pub fn hessians(&self, what: &'static str) -> Result<[Tensor<N>; N]> {
        self.hessians.ok_or(Error::MissingHessian { what })
    }
}

impl<const N: usize> TensorJet<N> {
    pub fn gradient(&self, what: &'static str) -> Result<[Tensor<N>; N]> {
        self.gradient.ok_or(Error::MissingHessian { what })
    }
}

/// Row `i` of a tensor as a vector (the gradient of component `i` when the
/// tensor is a jacobian).
pub fn row<const N: usize>(t: &Tensor<N>, i: usize) -> Vector<N> {
    Vector::new(t.0[i])
}

type ScalarEval<const N: usize> = dyn Fn(&Vector<N>) -> ScalarJet<N> + Send + Sync;
type VectorEval<const N: usize> = dyn Fn(&Vector<N>) -> VectorJet<N> + Send + Sync;
type TensorEval<const N: usize> = dyn Fn(&Vector<N>) -> TensorJet<N> + Send + Sync;

/// An ambient scalar field `f : R^N -> R` with exact derivatives.
#[derive(Clone)]
pub struct ScalarField<const N: usize = 3>(Arc<ScalarEval<N>>);

/// An ambient vector field `w : R^N -> R^N` with exact derivatives.
#[derive(Clone)]
pub struct VectorField<const N: usize = 3>(Arc<VectorEval<N>>);

/// An ambient tensor field `S : R^N -> R^{N x N}` with exact first
/// derivatives.
#[derive(Clone)]
pub struct TensorField<const N: usize = 3>(Arc<TensorEval<N>>);

impl<const N: usize> ScalarField<N> {
    /// Wrap a jet evaluator. The evaluator is trusted; see [`Self::validated`]
    /// for the checked constructor.
    pub fn from_jet_fn(f: impl Fn(&Vector<N>) -> ScalarJet<N> + Send + Sync + 'static) -> Self {
        ScalarField(Arc::new(f))
    }

    /// Wrap a jet evaluator and verify its derivatives against central
    /// finite differences at the given sample points. This is the default
    /// way to bring hand-written evaluators into the crate.
    pub fn validated(
        f: impl Fn(&Vector<N>) -> ScalarJet<N> + Send + Sync + 'static,
        samples: &[Vector<N>],
        scale: f64,
    ) -> Result<Self> {
        let field = Self::from_jet_fn(f);
        field.validate(samples, scale)?;
        Ok(field)
    }

    pub fn constant(value: f64) -> Self {
        Self::from_jet_fn(move |_| ScalarJet::constant(value))
    }

    /// The coordinate function `x -> x_i`.
    pub fn coordinate(i: usize) -> Self {
        Self::from_jet_fn(move |x| ScalarJet {
            value: x[i],
            gradient: Vector::basis(i),
            hessian: Some(Tensor::zero()),
        })
    }

    /// The affine function `x -> a . x + b`.
    pub fn affine(a: Vector<N>, b: f64) -> Self {
        Self::from_jet_fn(move |x| ScalarJet {
            value: a.dot(x) + b,
            gradient: a,
            hessian: Some(Tensor::zero()),
        })
    }

    pub fn polynomial(p: Polynomial<N>) -> Self {
        Self::from_jet_fn(move |x| p.jet(x))
    }

    pub fn jet(&self, x: &Vector<N>) -> ScalarJet<N> {
        (self.0)(x)
    }

    pub fn value(&self, x: &Vector<N>) -> f64 {
        self.jet(x).value
    }

    pub fn gradient(&self, x: &Vector<N>) -> Vector<N> {
        self.jet(x).gradient
    }

    /// The gradient as a vector field, one derivative order shallower than
    /// the scalar field: its jacobian is this field's hessian and its own
    /// second derivatives are absent. For exact deep jets of a polynomial
    /// use [`Polynomial::gradient_field`].
    pub fn gradient_field(&self) -> VectorField<N> {
        let f = self.clone();
        VectorField::from_jet_fn(move |x| {
            let jet = f.jet(x);
            VectorJet {
                value: jet.gradient,
                jacobian: jet
                    .hessian
                    .expect("gradient_field requires a field with hessians"),
                hessians: None,
            }
        })
    }

    /// Pointwise product `self * other`.
    pub fn product(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::from_jet_fn(move |x| a.jet(x).product(&b.jet(x)))
    }

    pub fn sum(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::from_jet_fn(move |x| a.jet(x).add(&b.jet(x)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let a = self.clone();
        Self::from_jet_fn(move |x| a.jet(x).scale(factor))
    }

    /// Check gradient against finite differences of the value, and hessian
    /// (when present) against finite differences of the gradient.
    pub fn validate(&self, samples: &[Vector<N>], scale: f64) -> Result<()> {
        let h = VALIDATION_STEP_FACTOR * scale;
        for x in samples {
            let jet = self.jet(x);
            let mut fd_grad = Vector::zero();
            let mut fd_hess = Tensor::zero();
            for j in 0..N {
                let (mut xp, mut xm) = (*x, *x);
                xp[j] += h;
                xm[j] -= h;
                let (jp, jm) = (self.jet(&xp), self.jet(&xm));
                fd_grad[j] = (jp.value - jm.value) / (2.0 * h);
                let col = (jp.gradient - jm.gradient) / (2.0 * h);
                for i in 0..N {
                    fd_hess[(i, j)] = col[i];
                }
            }
            let grad_scale = 1.0f64.max(jet.gradient.norm());
            let err = (fd_grad - jet.gradient).norm() / grad_scale;
            if err > VALIDATION_TOL {
                return Err(Error::FieldValidation {
                    what: "scalar gradient",
                    error: err,
                    tolerance: VALIDATION_TOL,
                });
            }
            if let Some(hess) = jet.hessian {
                let err = (fd_hess - hess).norm() / 1.0f64.max(hess.norm());
                if err > VALIDATION_TOL {
                    return Err(Error::FieldValidation {
                        what: "scalar hessian",
                        error: err,
                        tolerance: VALIDATION_TOL,
                    });
                }
            }
        }
        Ok(())
    }
}

impl<const N: usize> VectorField<N> {
    pub fn from_jet_fn(f: impl Fn(&Vector<N>) -> VectorJet<N> + Send + Sync + 'static) -> Self {
        VectorField(Arc::new(f))
    }

    /// Wrap and validate against finite differences; the checked default for
    /// hand-written evaluators.
    pub fn validated(
        f: impl Fn(&Vector<N>) -> VectorJet<N> + Send + Sync + 'static,
        samples: &[Vector<N>],
        scale: f64,
    ) -> Result<Self> {
        let field = Self::from_jet_fn(f);
        field.validate(samples, scale)?;
        Ok(field)
    }

    pub fn constant(value: Vector<N>) -> Self {
        Self::from_jet_fn(move |_| VectorJet::constant(value))
    }

    /// The identity field `x -> x`.
    pub fn position() -> Self {
        Self::from_jet_fn(|x| VectorJet {
            value: *x,
            jacobian: Tensor::identity(),
            hessians: Some([Tensor::zero(); N]),
        })
    }

    /// The linear field `x -> A x`.
    pub fn linear(a: Tensor<N>) -> Self {
        Self::from_jet_fn(move |x| VectorJet {
            value: a.apply(x),
            jacobian: a,
            hessians: Some([Tensor::zero(); N]),
        })
    }

    /// A field with polynomial components.
    pub fn polynomial(components: [Polynomial<N>; N]) -> Self {
        Self::from_jet_fn(move |x| {
            let jets = components.each_ref().map(|p| p.jet(x));
            let mut value = Vector::zero();
            let mut jacobian = Tensor::zero();
            let mut hessians = [Tensor::zero(); N];
            for i in 0..N {
                value[i] = jets[i].value;
                for j in 0..N {
                    jacobian[(i, j)] = jets[i].gradient[j];
                }
                hessians[i] = jets[i].hessian.unwrap();
            }
            VectorJet {
                value,
                jacobian,
                hessians: Some(hessians),
            }
        })
    }

    pub fn jet(&self, x: &Vector<N>) -> VectorJet<N> {
        (self.0)(x)
    }

    pub fn value(&self, x: &Vector<N>) -> Vector<N> {
        self.jet(x).value
    }

    pub fn jacobian(&self, x: &Vector<N>) -> Tensor<N> {
        self.jet(x).jacobian
    }

    /// Pointwise dot product as a scalar field.
    pub fn dot(&self, other: &Self) -> ScalarField<N> {
        let (a, b) = (self.clone(), other.clone());
        ScalarField::from_jet_fn(move |x| a.jet(x).dot(&b.jet(x)))
    }

    /// Pointwise product with a scalar field.
    pub fn scaled_by(&self, s: &ScalarField<N>) -> Self {
        let (w, s) = (self.clone(), s.clone());
        Self::from_jet_fn(move |x| w.jet(x).scaled_by(&s.jet(x)))
    }

    pub fn sum(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::from_jet_fn(move |x| a.jet(x).add(&b.jet(x)))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let a = self.clone();
        Self::from_jet_fn(move |x| a.jet(x).scale(factor))
    }

    /// The `i`-th component as a scalar field.
    pub fn component(&self, i: usize) -> ScalarField<N> {
        let w = self.clone();
        ScalarField::from_jet_fn(move |x| {
            let jet = w.jet(x);
            ScalarJet {
                value: jet.value[i],
                gradient: row(&jet.jacobian, i),
                hessian: jet.hessians.map(|h| h[i]),
            }
        })
    }

    /// Check the jacobian against finite differences of the value, and the
    /// component hessians (when present) against finite differences of the
    /// jacobian.
    pub fn validate(&self, samples: &[Vector<N>], scale: f64) -> Result<()> {
        for i in 0..N {
            self.component(i).validate(samples, scale).map_err(|e| match e {
                Error::FieldValidation { error, tolerance, .. } => Error::FieldValidation {
                    what: "vector component derivatives",
                    error,
                    tolerance,
                },
                other => other,
            })?;
        }
        Ok(())
    }
}

impl<const N: usize> TensorField<N> {
    pub fn from_jet_fn(f: impl Fn(&Vector<N>) -> TensorJet<N> + Send + Sync + 'static) -> Self {
        TensorField(Arc::new(f))
    }

    pub fn constant(value: Tensor<N>) -> Self {
        Self::from_jet_fn(move |_| TensorJet {
            value,
            gradient: Some([Tensor::zero(); N]),
        })
    }

    /// A tensor field with polynomial entries.
    pub fn polynomial(entries: [[Polynomial<N>; N]; N]) -> Self {
        Self::from_jet_fn(move |x| {
            let mut value = Tensor::zero();
            let mut gradient = [Tensor::zero(); N];
            for i in 0..N {
                for j in 0..N {
                    let jet = entries[i][j].jet(x);
                    value[(i, j)] = jet.value;
                    for k in 0..N {
                        gradient[k][(i, j)] = jet.gradient[k];
                    }
                }
            }
            TensorJet {
                value,
                gradient: Some(gradient),
            }
        })
    }

    /// The jacobian of a vector field, as a tensor field. First derivatives
    /// of the result exist exactly when the vector field carries hessians.
    pub fn jacobian_of(w: &VectorField<N>) -> Self {
        let w = w.clone();
        Self::from_jet_fn(move |x| {
            let jet = w.jet(x);
            let gradient = jet.hessians.map(|h| {
                let mut g = [Tensor::zero(); N];
                for k in 0..N {
                    for i in 0..N {
                        for j in 0..N {
                            // d/dx_k (Dw)_ij = d^2 w_i / dx_j dx_k
                            g[k][(i, j)] = h[i][(j, k)];
                        }
                    }
                }
                g
            });
            TensorJet {
                value: jet.jacobian,
                gradient,
            }
        })
    }

    /// The outer product `u ⊗ v` of two vector fields.
    pub fn outer_of(u: &VectorField<N>, v: &VectorField<N>) -> Self {
        let (u, v) = (u.clone(), v.clone());
        Self::from_jet_fn(move |x| {
            let (ju, jv) = (u.jet(x), v.jet(x));
            let mut gradient = [Tensor::zero(); N];
            for k in 0..N {
                for i in 0..N {
                    for j in 0..N {
                        gradient[k][(i, j)] =
                            ju.jacobian[(i, k)] * jv.value[j] + ju.value[i] * jv.jacobian[(j, k)];
                    }
                }
            }
            TensorJet {
                value: outer(&ju.value, &jv.value),
                gradient: Some(gradient),
            }
        })
    }

    pub fn jet(&self, x: &Vector<N>) -> TensorJet<N> {
        (self.0)(x)
    }

    pub fn value(&self, x: &Vector<N>) -> Tensor<N> {
        self.jet(x).value
    }

    pub fn transposed(&self) -> Self {
        let s = self.clone();
        Self::from_jet_fn(move |x| {
            let jet = s.jet(x);
            TensorJet {
                value: jet.value.transpose(),
                gradient: jet.gradient.map(|g| g.map(|t| t.transpose())),
            }
        })
    }

    /// Pointwise composition `self · other`.
    pub fn composed(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::from_jet_fn(move |x| {
            let (ja, jb) = (a.jet(x), b.jet(x));
            let gradient = match (ja.gradient, jb.gradient) {
                (Some(ga), Some(gb)) => {
                    let mut g = [Tensor::zero(); N];
                    for k in 0..N {
                        g[k] = ga[k].compose(&jb.value) + ja.value.compose(&gb[k]);
                    }
                    Some(g)
                }
                _ => None,
            };
            TensorJet {
                value: ja.value.compose(&jb.value),
                gradient,
            }
        })
    }

    /// Pointwise product with a scalar field.
    pub fn scaled_by(&self, s: &ScalarField<N>) -> Self {
        let (t, s) = (self.clone(), s.clone());
        Self::from_jet_fn(move |x| {
            let (jt, js) = (t.jet(x), s.jet(x));
            let gradient = jt.gradient.map(|g| {
                let mut out = [Tensor::zero(); N];
                for k in 0..N {
                    out[k] = g[k] * js.value + jt.value * js.gradient[k];
                }
                out
            });
            TensorJet {
                value: jt.value * js.value,
                gradient,
            }
        })
    }

    /// Application to a vector field: `x -> S(x) w(x)`. The result carries a
    /// jacobian but no hessians.
    pub fn applied_to(&self, w: &VectorField<N>) -> VectorField<N> {
        let (s, w) = (self.clone(), w.clone());
        VectorField::from_jet_fn(move |x| {
            let (js, jw) = (s.jet(x), w.jet(x));
            let mut jacobian = js.value.compose(&jw.jacobian);
            if let Some(g) = js.gradient {
                for k in 0..N {
                    let col = g[k].apply(&jw.value);
                    for i in 0..N {
                        jacobian[(i, k)] += col[i];
                    }
                }
            }
            VectorJet {
                value: js.value.apply(&jw.value),
                jacobian,
                hessians: None,
            }
        })
    }
}

/// Relative tolerance used by the field validation routines.
pub const VALIDATION_TOL: f64 = 1e-6;
/// Step factor (times the geometry scale) for validation differences.
pub const VALIDATION_STEP_FACTOR: f64 = 1e-5;

/// A multivariate polynomial with exact jet evaluation.
///
/// Terms are `(coefficient, exponents)` pairs; exponents are per-coordinate.
#[derive(Clone, Debug, Default)]
pub struct Polynomial<const N: usize = 3> {
    terms: Vec<(f64, [u8; N])>,
}

impl<const N: usize> Polynomial<N> {
    pub fn new(terms: Vec<(f64, [u8; N])>) -> Self {
        Polynomial { terms }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial {
            terms: vec![(c, [0; N])],
        }
    }

    /// The monomial `x_i`.
    pub fn coordinate(i: usize) -> Self {
        let mut e = [0; N];
        e[i] = 1;
        Polynomial {
            terms: vec![(1.0, e)],
        }
    }

    /// A dense random polynomial of the given total degree with coefficients
    /// uniform in `[-amplitude, amplitude]`.
    pub fn random(degree: u8, amplitude: f64, rng: &mut impl rand::Rng) -> Self {
        let mut terms = Vec::new();
        let mut exps = vec![[0u8; N]];
        // Enumerate all exponent tuples with total degree <= degree, in a
        // fixed order so seeded draws are reproducible.
        for axis in 0..N {
            let mut next = Vec::new();
            for e in &exps {
                let used: u8 = e.iter().sum();
                for k in 0..=(degree - used) {
                    let mut e2 = *e;
                    e2[axis] = k;
                    next.push(e2);
                }
            }
            exps = next;
        }
        exps.sort();
        exps.dedup();
        for e in exps {
            terms.push((rng.gen_range(-amplitude..amplitude), e));
        }
        Polynomial { terms }
    }

    pub fn value(&self, x: &Vector<N>) -> f64 {
        let mut s = 0.0;
        for (c, e) in &self.terms {
            s += c * monomial(x, e);
        }
        s
    }

    /// Exact partial derivative with respect to `x_axis`, as a polynomial.
    pub fn partial(&self, axis: usize) -> Self {
        let mut terms = Vec::new();
        for (c, e) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut ed = *e;
            ed[axis] -= 1;
            terms.push((c * e[axis] as f64, ed));
        }
        Polynomial { terms }.collected()
    }

    /// The exact gradient as a vector field (whose own derivatives reach one
    /// order deeper than the scalar field's jets).
    pub fn gradient_field(&self) -> VectorField<N> {
        let partials: Vec<Polynomial<N>> = (0..N).map(|i| self.partial(i)).collect();
        let partials: [Polynomial<N>; N] = partials.try_into().ok().expect("length N");
        VectorField::polynomial(partials)
    }

    /// Exact value, gradient and hessian at `x`.
    pub fn jet(&self, x: &Vector<N>) -> ScalarJet<N> {
        let mut value = 0.0;
        let mut gradient = Vector::zero();
        let mut hessian = Tensor::zero();
        for (c, e) in &self.terms {
            value += c * monomial(x, e);
            for i in 0..N {
                if e[i] == 0 {
                    continue;
                }
                let mut ei = *e;
                ei[i] -= 1;
                let di = c * e[i] as f64;
                gradient[i] += di * monomial(x, &ei);
                for j in 0..N {
                    if ei[j] == 0 {
                        continue;
                    }
                    let mut eij = ei;
                    eij[j] -= 1;
                    hessian[(i, j)] += di * ei[j] as f64 * monomial(x, &eij);
                }
            }
        }
        ScalarJet {
            value,
            gradient,
            hessian: Some(hessian),
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ca, ea) in &self.terms {
            for (cb, eb) in &other.terms {
                let mut e = [0u8; N];
                for i in 0..N {
                    e[i] = ea[i] + eb[i];
                }
                terms.push((ca * cb, e));
            }
        }
        Polynomial { terms }.collected()
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Polynomial { terms }.collected()
    }

    fn collected(mut self) -> Self {
        self.terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut out: Vec<(f64, [u8; N])> = Vec::with_capacity(self.terms.len());
        for (c, e) in self.terms {
            match out.last_mut() {
                Some(last) if last.1 == e => last.0 += c,
                _ => out.push((c, e)),
            }
        }
        out.retain(|(c, _)| *c != 0.0);
        Polynomial { terms: out }
    }
}

fn monomial<const N: usize>(x: &Vector<N>, exponents: &[u8; N]) -> f64 {
    let mut m = 1.0;
    for i in 0..N {
        for _ in 0..exponents[i] {
            m *= x[i];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_points() -> Vec<Vector<3>> {
        vec![
            Vector::new([0.3, -0.2, 0.9]),
            Vector::new([1.0, 0.5, -0.25]),
            Vector::new([-0.7, 1.2, 0.1]),
        ]
    }

    #[test]
    fn polynomial_jets_survive_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let p = Polynomial::<3>::random(3, 1.0, &mut rng);
            let f = ScalarField::polynomial(p);
            f.validate(&sample_points(), 1.0).unwrap();
        }
    }

    #[test]
    fn polynomial_product_jets_match_jet_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Polynomial::<3>::random(2, 1.0, &mut rng);
        let q = Polynomial::<3>::random(2, 1.0, &mut rng);
        let exact = ScalarField::polynomial(p.product(&q));
        let composed = ScalarField::polynomial(p).product(&ScalarField::polynomial(q));
        for x in sample_points() {
            let (a, b) = (exact.jet(&x), composed.jet(&x));
            assert!((a.value - b.value).abs() <= 1e-12 * (1.0 + a.value.abs()));
            assert!((a.gradient - b.gradient).norm() <= 1e-12 * (1.0 + a.gradient.norm()));
            let (ha, hb) = (a.hessian.unwrap(), b.hessian.unwrap());
            assert!((ha - hb).norm() <= 1e-12 * (1.0 + ha.norm()));
        }
    }

    #[test]
    fn vector_dot_jet_matches_polynomial_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let comps_u: [Polynomial<3>; 3] =
            std::array::from_fn(|_| Polynomial::random(2, 1.0, &mut rng));
        let comps_v: [Polynomial<3>; 3] =
            std::array::from_fn(|_| Polynomial::random(2, 1.0, &mut rng));
        let u = VectorField::polynomial(comps_u.clone());
        let v = VectorField::polynomial(comps_v.clone());
        let dot = u.dot(&v);
        let mut expanded = Polynomial::constant(0.0);

        for i in 0..3 {
            expanded = expanded.sum(&comps_u[i].product(&comps_v[i]));
        }
        let exact = ScalarField::polynomial(expanded);
        for x in sample_points() {
            let (a, b) = (dot.jet(&x), exact.jet(&x));
            assert!((a.value - b.value).abs() <= 1e-12 * (1.0 + a.value.abs()));
            assert!((a.gradient - b.gradient).norm() <= 1e-11 * (1.0 + a.gradient.norm()));
            assert!(
                (a.hessian.unwrap() - b.hessian.unwrap()).norm()
                    <= 1e-11 * (1.0 + b.hessian.unwrap().norm())
            );
        }
    }

    #[test]
    fn validation_rejects_a_wrong_gradient() {
        let lying = ScalarField::<3>::from_jet_fn(|x| ScalarJet {
            value: x[0] * x[0],
            gradient: Vector::basis(0), // should be 2 x_0 e_0
            hessian: None,
        });
        let err = lying.validate(&sample_points(), 1.0).unwrap_err();
        assert!(matches!(err, Error::FieldValidation { .. }));
    }

    #[test]
    fn jacobian_of_field_exposes_component_hessians() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let comps: [Polynomial<3>; 3] =
            std::array::from_fn(|_| Polynomial::random(3, 1.0, &mut rng));
        let w = VectorField::polynomial(comps);
        let dw = TensorField::jacobian_of(&w);
        let x = Vector::new([0.4, 0.8, -0.3]);
        let jet = dw.jet(&x);
        assert!((jet.value - w.jacobian(&x)).norm() <= 1e-14);
        // Directional derivative of Dw along e_k must match FD.
        let h = 1e-6;
        let g = jet.gradient.unwrap();
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (w.jacobian(&xp) - w.jacobian(&xm)) / (2.0 * h);
            assert!((fd - g[k]).norm() <= 1e-6 * (1.0 + g[k].norm()));
        }
    }

    #[test]
    fn tensor_combinators_propagate_first_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let entries: [[Polynomial<3>; 3]; 3] =
            std::array::from_fn(|_| std::array::from_fn(|_| Polynomial::random(2, 1.0, &mut rng)));
        let s = TensorField::polynomial(entries);
        let alpha = ScalarField::polynomial(Polynomial::random(2, 1.0, &mut rng));
        let scaled = s.scaled_by(&alpha);
        let x = Vector::new([0.2, -0.6, 0.5]);
        let h = 1e-6;
        let jet = scaled.jet(&x);
        let g = jet.gradient.unwrap();
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (scaled.value(&xp) - scaled.value(&xm)) / (2.0 * h);
            assert!((fd - g[k]).norm() <= 1e-5 * (1.0 + g[k].norm()));
        }
    }
}
