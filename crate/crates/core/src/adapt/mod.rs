//! Integrated face error, refinement and derefinement decisions, order
//! propagation and the outer rp-adaptivity loop.

mod deref;
mod driver;
mod face_error;
mod orders;
mod plan;

pub use deref::{try_derefine, DerefOutcome, DerefReference};
pub use driver::{run_rp_adaptivity, AdaptResult, ExitReason, HistoryEntry};
pub use face_error::{face_error, FaceErrorReport};
pub use orders::{edge_touching_elevation, mark_for_refinement, propagate_orders, schedule_refinement};
pub use plan::{AdaptivityPlan, DerefCriterion, RefineCriterion};
