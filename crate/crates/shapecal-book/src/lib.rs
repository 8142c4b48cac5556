//! The `shapecal` guide, compiled. Each module's documentation is a chapter
//! of the mdbook under `book/`, included verbatim so that `cargo test` runs
//! every code block in the guide as a doc-test. If a chapter drifts from the
//! library's API, the build breaks here.

#[doc = include_str!("../../../book/src/ch01-overview.md")]
pub mod ch01_overview {}

#[doc = include_str!("../../../book/src/ch02-surfaces.md")]
pub mod ch02_surfaces {}

#[doc = include_str!("../../../book/src/ch03-tangential-calculus.md")]
pub mod ch03_tangential_calculus {}

#[doc = include_str!("../../../book/src/ch04-curvature.md")]
pub mod ch04_curvature {}

#[doc = include_str!("../../../book/src/ch05-velocities-and-flows.md")]
pub mod ch05_velocities_and_flows {}

#[doc = include_str!("../../../book/src/ch06-shape-derivatives.md")]
pub mod ch06_shape_derivatives {}

#[doc = include_str!("../../../book/src/ch07-functionals.md")]
pub mod ch07_functionals {}

#[doc = include_str!("../../../book/src/ch08-oracle.md")]
pub mod ch08_oracle {}

#[doc = include_str!("../../../book/src/ch09-meshes.md")]
pub mod ch09_meshes {}

#[doc = include_str!("../../../book/src/ch10-newton.md")]
pub mod ch10_newton {}

#[doc = include_str!("../../../book/src/ch11-cli.md")]
pub mod ch11_cli {}
