//! Tangential calculus and shape derivatives on closed hypersurfaces.
//!
//! The crate is organized in layers, each usable on its own:
//!
//! * [`tensor`] — fixed-size vectors and second-order tensors in ambient
//!   dimension `N` (2 or 3), with the handful of contractions the rest of
//!   the crate is written in (outer products, Frobenius pairings, traces).
//! * [`field`] — ambient scalar / vector / tensor fields carrying their own
//!   first and (optionally) second derivatives, plus exact polynomial fields
//!   and the combinators needed to build test cases without finite
//!   differencing.
//! * [`levelset`] and [`surface`] — surfaces described implicitly as the
//!   zero set of a smooth function, together with parametric charts and
//!   Gauss–Legendre quadrature for the built-in sphere, ellipsoid and torus.
//! * [`tangential`] and [`invariants`] — tangential differential operators
//!   (gradient, jacobian, divergence, Laplace–Beltrami, second tangential
//!   derivative) and curvature invariants derived from the Weingarten map.
//! * [`shape_derivatives`] — closed-form first shape derivatives of the
//!   geometric quantities above under a normal velocity field.
//! * [`flow`] and [`functionals`] — the velocity method: flowing points,
//!   meshes and quadrature nodes through an ambient velocity field, geometric
//!   functionals (area, Willmore-type energies, total Gauss curvature), and
//!   finite-difference oracles that validate every closed-form derivative.
//! * [`mesh`], [`meshio`], [`fem`], [`newton`] — triangulated surfaces with
//!   OFF/OBJ I/O, curvature recovery, P1 surface finite elements, and a
//!   Newton-type scheme that moves mesh vertices along their normals to find
//!   critical points of area and Willmore-type functionals.
//! * [`cli`] — the `shapecal` command-line runner (`geometry-check`,
//!   `verify-derivatives`, `newton`, `flow`) with JSON configs and CSV
//!   reports.
//!
//! Conventions used throughout: surfaces are closed and orientable, the
//! level-set function is negative inside and the normal points outward; the
//! mean curvature is the full trace of the Weingarten map (so a unit sphere
//! has `kappa = 2`), and the Gauss curvature in 3D is the product of the two
//! principal curvatures.

pub mod tensor;
pub mod field;
pub mod levelset;
pub mod surface;
pub mod quadrature;
pub mod invariants;
pub mod tangential;
pub mod shape_derivatives;
pub mod functionals;
pub mod flow;
pub mod mesh;
pub mod meshio;
pub mod fem;
pub mod newton;
pub mod cli;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The level-set gradient is too small to define a normal direction.
    #[error("degenerate level-set gradient (|grad phi| = {norm:.3e}) at {point:?}")]
    DegenerateGradient { point: Vec<f64>, norm: f64 },

    /// Closest-point projection failed to reach the zero set.
    #[error("projection onto the surface did not converge after {iterations} iterations (|phi| = {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    /// A point handed to an on-surface operation is too far from the zero set.
    #[error("point {point:?} is not on the surface (|phi|/scale = {distance:.3e})")]
    OffSurface { point: Vec<f64>, distance: f64 },

    /// An operation required second derivatives the field does not carry.
    #[error("{what} requires second derivatives, but the field was built without them")]
    MissingHessian { what: &'static str },

    /// An operation required third derivatives of the level-set function.
    #[error("{what} requires third derivatives of the level-set function")]
    MissingThirdDerivative { what: &'static str },

    /// A tensor expected to be symmetric was not.
    #[error("tensor is not symmetric (|S - S^T| = {skew:.3e}, tolerance {tolerance:.1e})")]
    AsymmetricTensor { skew: f64, tolerance: f64 },

    /// The requested quantity is only defined in a specific ambient dimension.
    #[error("{what} is only defined for ambient dimension {expected}, got {actual}")]
    UnsupportedDimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A mesh triangle has (numerically) zero area.
    #[error("triangle {index} is degenerate (area = {area:.3e})")]
    DegenerateTriangle { index: usize, area: f64 },

    /// The mesh is not a closed, consistently oriented 2-manifold.
    #[error("mesh is not a closed oriented manifold: {detail}")]
    NotClosedManifold { detail: String },

    /// A mesh file could not be parsed.
    #[error("{path}:{line}: {message}")]
    MeshParse {
        path: String,
        line: usize,
        message: String,
    },

    /// A vertex index in a mesh file or constructor is out of range.
    #[error("vertex index {index} out of range (mesh has {vertices} vertices)")]
    IndexOutOfRange { index: usize, vertices: usize },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// The iterative linear solver failed to reach its tolerance.
    #[error("conjugate gradient did not converge within {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    /// The (shifted) second-derivative operator lost positive definiteness.
    #[error("linear operator is not positive definite (p^T A p = {curvature:.3e}); increase the spectral shift")]
    IndefiniteOperator { curvature: f64 },

    /// A field failed its derivative consistency validation.
    #[error("field validation failed: {what} disagrees with finite differences (error {error:.3e}, tolerance {tolerance:.1e})")]
    FieldValidation {
        what: &'static str,
        error: f64,
        tolerance: f64,
    },

    /// Bad experiment configuration (CLI or JSON).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
