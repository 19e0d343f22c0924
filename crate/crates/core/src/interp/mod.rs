//! Level-set fields and arbitrary-point interpolation from a background mesh.

mod levelset;
mod locator;

pub use levelset::{AnalyticLevelSet, DiscreteLevelSet, LevelSetField};
pub use locator::{ComputationalCoords, FoundStatus, Locator};
