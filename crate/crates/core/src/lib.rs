//! Discretization of surface differential operators on triangle meshes by
//! local tangential lifting: every vertex projects its neighborhood onto an
//! approximating tangent plane, where moment-matched stencils and polynomial
//! jets turn neighbor differences into gradients, Laplacians and curvatures.
//!
//! The crate is organized along the pipeline:
//!
//! - [`mesh`] — triangle meshes, OFF/OBJ I/O, analytic test-surface
//!   generators and half-integer ring queries,
//! - [`lifting`] — per-vertex normals, tangent frames and the lifting of
//!   neighborhoods and scalar fields into the tangent plane,
//! - [`stencil`] — moment-matching configuration systems solved by
//!   minimal-norm pseudo-inverse,
//! - [`operator`] — global sparse operators for the Laplace–Beltrami
//!   operator and the weighted divergence form, plus diffusion stepping,
//! - [`highorder`] — degree-k height/scalar jets, geometric invariants and
//!   high-order surface differentials,
//! - [`spectral`] — eigenpairs of the assembled (nonsymmetric) operators
//!   with clustering and subspace alignment errors,
//! - [`harness`] — error metrics, experimental orders of convergence and
//!   reproducible study reports.

pub mod harness;
pub mod highorder;
pub mod lifting;
pub(crate) mod linalg;
pub mod mesh;
pub mod operator;
pub mod sparse;
pub mod spectral;
pub mod stencil;

pub use mesh::{NeighborhoodSpec, TriMesh};
