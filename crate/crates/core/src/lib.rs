//! Multi-level hp finite elements on Cartesian refinement trees.
//!
//! The crate builds C⁰-continuous high-order bases on hierarchically refined
//! Cartesian meshes of arbitrary dimension. Shape functions are tensor products
//! of integrated Legendre polynomials, selected per cell by Boolean tensor
//! masks; refinement works by superposition, so coarse cells keep contributing
//! shape functions underneath their overlays.
//!
//! The pipeline is array based throughout:
//!
//! 1. [`mesh::HierarchicalMesh`] stores the refinement tree as flat arrays
//!    (neighbors, parent, level, leaf flags).
//! 2. [`masks::create_mlhp_masks`] activates shape functions on every cell so
//!    that they glue together continuously and vanish on internal boundaries.
//! 3. [`dofmap`] numbers the active shape functions globally and concatenates
//!    the numbers through the hierarchy into per-element location maps.
//! 4. [`basis`] evaluates the resulting basis; [`assembly`] integrates the
//!    Poisson and θ-method systems into CSR matrices; [`solver`] runs
//!    Jacobi-preconditioned conjugate gradients.
//!
//! [`problems`] and [`study`] contain the corner-singularity and moving-source
//! heat problems together with their convergence drivers.

pub mod assembly;
pub mod basis;
pub mod dofmap;
pub mod error;
pub mod io;
pub mod masks;
pub mod mesh;
pub mod ndarray;
pub mod polynomials;
pub mod problems;
pub mod solver;
pub mod sparse;
pub mod study;

pub use assembly::{BoundaryFaces, Execution, LinearSystem};
pub use basis::MlhpBasis;
pub use error::{Error, Result};
pub use masks::{Space, TensorMask};
pub use mesh::{CellId, HierarchicalMesh, NO_CELL};
pub use dofmap::{DofId, LocationMap, LocationMatrix, NO_DOF};
pub use solver::{cg_jacobi, CgOptions, SolveReport};
pub use sparse::SparseMatrixCsr;
