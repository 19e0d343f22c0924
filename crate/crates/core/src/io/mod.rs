//! Mesh generation, the text mesh format, SVG/VTK export and the study harness.

mod export;
mod generate;
mod meshfile;
mod study;

pub use generate::{generate_cartesian, perturb_interior, unit_square};
pub use meshfile::{MeshFile, ScalarField, DUPLICATE_TOL};
pub use export::{edge_polyline, element_outline, export_svg, export_vtk, Coloring, SVG_EDGE_SEGMENTS};
pub use study::{
    adaptive_plan, adaptive_run, format_histogram, history_to_csv, status_name, load_levelset, records_to_csv, run_study, uniform_run, AdaptiveRun,
    StudyConfig, StudyRecord, UniformSweep,
};
