//! Mixed-order curvilinear meshes fitted to the zero isocontour of a level-set
//! function.
//!
//! The crate morphs a 2D quadrilateral or triangular mesh so that a marked set
//! of faces aligns with `σ(x) = 0` (r-adaptivity, driven by target-matrix
//! quality metrics) and raises or lowers per-element polynomial orders where
//! the integrated fitting error calls for it (p-adaptivity).
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the CLI and file formats use.

pub mod adapt;
mod error;
pub mod fem;
pub mod interp;
pub mod io;
pub mod linalg;
mod scalar;
pub mod tmop;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec2 = linalg::Vec2<f64>;
pub type Mat2 = linalg::Mat2<f64>;
pub type Mesh = fem::MixedOrderMesh<f64>;
pub type Element = fem::Element<f64>;
pub type LevelSet = interp::LevelSetField<f64>;
pub type Locator = interp::Locator<f64>;
