//! Gauss–Legendre quadrature and deterministic summation.
//!
//! Integrals over parametrized surfaces use tensor-product Gauss–Legendre
//! grids; the rule is generated on demand by Newton iteration on the
//! Legendre polynomials. All reductions funnel through [`stable_sum`], a
//! fixed-shape blocked pairwise sum, so results are independent of thread
//! count and identical from run to run.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `(-1, 1)`.
///
/// Exact for polynomials of degree `2n - 1`; spectrally accurate for smooth
/// integrands.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

/// The `n`-point Gauss–Legendre rule mapped to `(a, b)`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`, via the
/// three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Size of the leaves in the pairwise summation tree. Small enough to keep
/// rounding growth logarithmic, large enough to stay cheap.
const SUM_BLOCK: usize = 32;

/// Blocked pairwise summation with a fixed association order.
///
/// The tree shape depends only on `values.len()`, so the result is exactly
/// reproducible no matter how the values were produced (including from
/// parallel maps collected in index order).
pub fn stable_sum(values: &[f64]) -> f64 {
    if values.len() <= SUM_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    // Split at the largest multiple of SUM_BLOCK that is at most half, so
    // leaves stay aligned to fixed block boundaries.
    let half = values.len() / 2;
    let split = half.next_multiple_of(SUM_BLOCK).min(values.len() - 1);
    stable_sum(&values[..split]) + stable_sum(&values[split..])
}

/// Dot product with the same fixed association order as [`stable_sum`].
pub fn stable_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    stable_sum(&products)
}

/// Map `items` to scalars (in parallel when beneficial) and reduce with
/// [`stable_sum`]. The map is collected in index order first, so the
/// reduction order never depends on scheduling.
pub fn parallel_map_sum<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Send + Sync,
{
    use rayon::prelude::*;
    let values: Vec<f64> = if items.len() >= 64 {
        items.par_iter().map(&f).collect()
    } else {
        items.iter().map(&f).collect()
    };
    stable_sum(&values)
}
