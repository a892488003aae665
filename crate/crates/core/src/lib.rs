//! Stress-aligned gridshell generation.
//!
//! The pipeline turns a triangulated design surface into a hex-dominant
//! gridshell layout and evaluates it as a 3D frame:
//!
//! 1. [`shell`]: plane-stress membrane FEM on the input surface, yielding a
//!    per-triangle stress tensor and its principal decomposition.
//! 2. [`field`]: smoothing, Lipschitz saturation, rescaling and optional
//!    symmetrization of the direction/density/anisotropy field.
//! 3. [`deform`]: metric-driven surface deformation so that the anisotropic
//!    target metric becomes Euclidean on the deformed domain.
//! 4. [`acvt`]: Poisson seeding and discrete Lloyd relaxation on the deformed
//!    domain, then extraction of the polygonal tessellation mapped back to
//!    the original surface.
//! 5. [`regularize`]: per-polygon shape regularization and optional symmetric
//!    welding.
//! 6. [`frame`]: linear static and linearized buckling analysis of the
//!    resulting beam network, plus equivalence checks between variants.
//!
//! [`pipeline`] wires the stages together behind a single serializable
//! configuration; [`mesh`] and [`sparse`] hold the shared geometry and
//! linear-algebra substrate.

pub mod acvt;
pub mod deform;
mod error;
pub mod field;
pub mod frame;
pub mod mesh;
pub mod pipeline;
pub mod primitives;
pub mod regularize;
pub mod shell;
pub mod sparse;

pub use error::{Error, Result};
