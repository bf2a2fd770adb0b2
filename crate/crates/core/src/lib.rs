//! Lowest-order mixed virtual element method for single-phase Darcy flow
//! around an immersed inclusion, on agglomerated polygonal meshes that may
//! contain cut cells at the inclusion tips.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod problem;
pub mod solve;
pub mod sparse;
pub mod study;
pub mod vem;

pub use error::{ErrorKind, Result, VemError};
pub use geometry::{Point2, Rect};
pub use mesh::{Inclusion, InclusionSide, PolyMesh};
pub use problem::{Affine, CellPermeability, DarcyProblem};
