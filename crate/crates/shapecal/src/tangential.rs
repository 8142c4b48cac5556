//! Tangential differential operators on a level-set surface.
//!
//! All operators act on ambient extension fields and use the unit-normal
//! extension `n = grad phi / |grad phi|`: the tangential gradient is
//! `P grad F` with `P = I - n ⊗ n`, the tangential jacobian is `(DW) P`,
//! the tangential divergence its trace, and the Laplace–Beltrami operator
//! comes from the extension identity
//! `lap_Γ f = lap F - n · (D^2 F) n - kappa (dF/dn)`
//! with `kappa = div n` the total mean curvature of the level set through
//! the point. Values on the surface are extension-independent; between
//! surfaces they define the operators on every nearby level set at once,
//! which is what makes iterated operators (second derivatives, curvature
//! gradients) plain compositions.

use crate::field::{row, ScalarField, ScalarJet, TensorField, TensorJet, VectorField};
use crate::levelset::LevelSet;
use crate::tensor::{Tensor, Vector};
use crate::Result;

/// Normal derivative `dF/dn = grad F · n`.
pub fn normal_derivative<const N: usize>(
    ls: &LevelSet<N>,
    f: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    Ok(f.gradient(x).dot(&ls.normal_at(x)?))
}

/// Tangential gradient `grad_Γ f = P grad F`.
pub fn tangential_gradient<const N: usize>(
    ls: &LevelSet<N>,
    f: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    Ok(ls.projector_at(x)?.apply(&f.gradient(x)))
}

/// The tangential gradient as a vector field with exact first derivatives:
/// `d_k (P grad F) = (d_k P) grad F + P (D^2 F) e_k`.
///
/// Requires `f` to carry hessians.
pub fn tangential_gradient_field<const N: usize>(
    ls: &LevelSet<N>,
    f: &ScalarField<N>,
) -> VectorField<N> {
    let projector = ls.projector_field();
    let f = f.clone();
    VectorField::from_jet_fn(move |x| {
        let fj = f.jet(x);
        let hess = fj
            .hessian
            .expect("tangential_gradient_field requires a field with hessians");
        let pj = projector.jet(x);
        let dp = pj
            .gradient
            .expect("projector field always carries first derivatives");
        let value = pj.value.apply(&fj.gradient);
        let mut jacobian = Tensor::zero();
        for k in 0..N {
            let mut hess_col = Vector::zero();
            for j in 0..N {
                hess_col[j] = hess[(j, k)];
            }
            let col = dp[k].apply(&fj.gradient) + pj.value.apply(&hess_col);
            for i in 0..N {
                jacobian[(i, k)] = col[i];
            }
        }
        crate::field::VectorJet {
            value,
            jacobian,
            hessians: None,
        }
    })
}

/// Tangential jacobian `D_Γ w = (DW) P` (rows are tangential gradients of
/// the components).
pub fn tangential_jacobian<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
    x: &Vector<N>,
) -> Result<Tensor<N>> {
    Ok(w.jacobian(x).compose(&ls.projector_at(x)?))
}

/// The tangential jacobian as a tensor field. First derivatives are present
/// when `w` carries hessians: `d_k (DW P) = (d_k DW) P + DW (d_k P)`.
pub fn tangential_jacobian_field<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
) -> TensorField<N> {
    let projector = ls.projector_field();
    let w = w.clone();
    TensorField::from_jet_fn(move |x| {
        let wj = w.jet(x);
        let pj = projector.jet(x);
        let value = wj.jacobian.compose(&pj.value);
        let gradient = wj.hessians.map(|hs| {
            let dp = pj.gradient.expect("projector field carries derivatives");
            let mut grads = [Tensor::zero(); N];
            for k in 0..N {
                // (d_k DW)_ij = d_k d_j w_i = hessian of w_i at (j, k).
                let mut dk_dw = Tensor::zero();
                for i in 0..N {
                    for j in 0..N {
                        dk_dw[(i, j)] = hs[i][(j, k)];
                    }
                }
                grads[k] = dk_dw.compose(&pj.value) + wj.jacobian.compose(&dp[k]);
            }
            grads
        });
        TensorJet { value, gradient }
    })
}

/// Tangential divergence `div_Γ w = P : DW = tr(DW P)`.
pub fn tangential_divergence<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    Ok(tangential_jacobian(ls, w, x)?.trace())
}

/// The tangential divergence as a scalar field with exact gradient.
/// Requires `w` to carry hessians.
pub fn tangential_divergence_field<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
) -> ScalarField<N> {
    let jac = tangential_jacobian_field(ls, w);
    ScalarField::from_jet_fn(move |x| {
        let j = jac.jet(x);
        let grads = j
            .gradient
            .expect("tangential_divergence_field requires a field with hessians");
        let mut gradient = Vector::zero();
        for k in 0..N {
            gradient[k] = grads[k].trace();
        }
        ScalarJet {
            value: j.value.trace(),
            gradient,
            hessian: None,
        }
    })
}

/// Laplace–Beltrami via the extension identity
/// `lap_Γ f = lap F - n · (D^2 F) n - kappa dF/dn`.
pub fn laplace_beltrami<const N: usize>(
    ls: &LevelSet<N>,
    f: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let jet = f.jet(x);
    let hess = jet.hessian("laplace_beltrami")?;
    let n = ls.normal_at(x)?;
    let kappa = ls.shape_operator_at(x)?.trace();
    Ok(hess.trace() - n.dot(&hess.apply(&n)) - kappa * jet.gradient.dot(&n))
}

/// Second tangential derivative `D^2_Γ f = D_Γ (grad_Γ f)`: the ambient
/// jacobian of the extended tangential gradient, projected on the right.
/// Not symmetric in general — its skew part is curvature times the normal
/// derivative of `f`.
pub fn second_tangential<const N: usize>(
    ls: &LevelSet<N>,
    f: &ScalarField<N>,
    x: &Vector<N>,
) -> Result<Tensor<N>> {
    let grad_field = tangential_gradient_field(ls, f);
    // Force the derivative requirement through the Result channel first.
    f.jet(x).hessian("second_tangential")?;
    Ok(grad_field.jacobian(x).compose(&ls.projector_at(x)?))
}

/// Componentwise Laplace–Beltrami of a vector field. Requires hessians.
pub fn vector_laplace_beltrami<const N: usize>(
    ls: &LevelSet<N>,
    w: &VectorField<N>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    let jet = w.jet(x);
    let hessians = jet.hessians("vector_laplace_beltrami")?;
    let n = ls.normal_at(x)?;
    let kappa = ls.shape_operator_at(x)?.trace();
    let mut out = Vector::zero();
    for i in 0..N {
        let h = hessians[i];
        let grad_i = row(&jet.jacobian, i);
        out[i] = h.trace() - n.dot(&h.apply(&n)) - kappa * grad_i.dot(&n);
    }
    Ok(out)
}

/// Row-wise tangential divergence of a tensor field:
/// `(div_Γ T)_i = div_Γ (row_i T)`. Requires the tensor field to carry
/// first derivatives.
pub fn tangential_tensor_divergence<const N: usize>(
    ls: &LevelSet<N>,
    t: &TensorField<N>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    let jet = t.jet(x);
    let grads = jet.gradient("tangential_tensor_divergence")?;
    let p = ls.projector_at(x)?;
    let mut out = Vector::zero();
    for i in 0..N {
        let mut acc = 0.0;
        for j in 0..N {
            for k in 0..N {
                acc += p[(j, k)] * grads[k][(i, j)];
            }
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Tangential gradient of the total mean curvature, `grad_Γ kappa =
/// P lap_Γ n`. Requires third derivatives of the level set.
pub fn curvature_gradient<const N: usize>(
    ls: &LevelSet<N>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    let normal = ls.normal_field();
    let lap_n = vector_laplace_beltrami(ls, &normal, x)?;
    Ok(ls.projector_at(x)?.apply(&lap_n))
}

/// The extended total mean curvature `kappa = div n` as a scalar field with
/// exact gradient. Requires third derivatives of the level set.
pub fn curvature_field<const N: usize>(ls: &LevelSet<N>) -> ScalarField<N> {
    let normal = ls.normal_field();
    ScalarField::from_jet_fn(move |x| {
        let jet = normal.jet(x);
        let hessians = jet
            .hessians
            .expect("curvature_field requires level-set third derivatives");
        let mut gradient = Vector::zero();
        for k in 0..N {
            let mut acc = 0.0;
            for i in 0..N {
                acc += hessians[i][(i, k)];
            }
            gradient[k] = acc;
        }
        ScalarJet {
            value: jet.jacobian.trace(),
            gradient,
            hessian: None,
        }
    })
}
