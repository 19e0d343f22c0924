//! Target-matrix quality metrics, the fitting-augmented objective and the
//! safeguarded Newton driver that moves mesh nodes (r-adaptivity).

mod marking;
mod metric;
mod problem;
mod solver;
mod target;

pub use marking::{mark_interface, MarkingMode, INSIDE, OUTSIDE};
pub use metric::QualityMetric;
pub use problem::{NodeFreedom, SolverControls, TmopConfig, TmopProblem};
pub use solver::{solve, IterationRecord, SolveReport, SolveStatus, StepKind};
pub use target::{ideal_target, TargetSpec};
