use std::collections::BTreeMap;

use crate::adapt::deref::{try_derefine, DerefOutcome, DerefReference};
use crate::adapt::face_error::FaceErrorReport;
use crate::adapt::orders::{edge_touching_elevation, mark_for_refinement, propagate_orders, schedule_refinement};
use crate::adapt::plan::AdaptivityPlan;
use crate::error::{Error, Result};
use crate::fem::MixedOrderMesh;
use crate::interp::LevelSetField;
use crate::scalar::Real;
use crate::tmop::{mark_interface, solve, SolveReport, SolveStatus, TmopConfig, TmopProblem};

/// Snapshot after the initial fit (iteration 0) and after every outer pass
/// that changed orders.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEntry<T> {
    pub iteration: usize,
    pub dofs: usize,
    pub total_error: T,
    pub max_error: T,
    pub sigma_max: T,
    pub histogram: BTreeMap<usize, usize>,
    pub refined_faces: usize,
    pub derefined_faces: usize,
    pub solve_status: SolveStatus,
    pub solver_iterations: usize,
    pub min_det: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitReason {
    /// No face failed the refinement criterion, or all failing faces were already at `p_max`.
    NothingRefined,
    /// Some element was raised to `p_max`.
    ReachedMaxOrder,
    /// The outer-iteration bound was hit.
    IterationCap,
}

#[derive(Clone, Debug)]
pub struct AdaptResult<T: Real> {
    pub mesh: MixedOrderMesh<T>,
    pub history: Vec<HistoryEntry<T>>,
    /// Outer passes executed, counting the one that exits.
    pub outer_iterations: usize,
    pub exit: ExitReason,
    /// Smallest `det A` after any accepted solver step or derefinement.
    pub min_det_seen: T,
    /// Every inner solve kept the objective non-increasing per weight level.
    pub solves_monotone: bool,
    pub stalled_solves: usize,
}

impl<T: Real> AdaptResult<T> {
    pub fn final_entry(&self) -> &HistoryEntry<T> {
        self.history.last().expect("history has the initial entry")
    }
}

struct Tracker<T> {
    min_det: T,
    monotone: bool,
    stalled: usize,
}

fn r_adapt<T: Real>(
    mesh: MixedOrderMesh<T>,
    field: &LevelSetField<T>,
    config: &TmopConfig<T>,
    tracker: &mut Tracker<T>,
) -> Result<(MixedOrderMesh<T>, SolveReport<T>)> {
    let mut problem = TmopProblem::new(mesh, field, config)?;
    let report = solve(&mut problem)?;
    tracker.min_det = tracker.min_det.min(report.min_det_seen());
    tracker.monotone &= report.is_monotone();
    if report.status == SolveStatus::Stalled {
        tracker.stalled += 1;
    }
    Ok((problem.mesh, report))
}

fn entry<T: Real>(
    iteration: usize,
    mesh: &MixedOrderMesh<T>,
    field: &LevelSetField<T>,
    solve: &SolveReport<T>,
    refined: usize,
    derefined: usize,
) -> Result<HistoryEntry<T>> {
    let rep = FaceErrorReport::for_marked(mesh, field)?;
    Ok(HistoryEntry {
        iteration,
        dofs: mesh.dof_count(),
        total_error: rep.total,
        max_error: rep.max,
        sigma_max: rep.node_sigma_max,
        histogram: mesh.order_histogram(),
        refined_faces: refined,
        derefined_faces: derefined,
        solve_status: solve.status,
        solver_iterations: solve.accepted_steps(),
        min_det: mesh.min_det_jacobian().1,
    })
}

/// rp-adaptivity: mark the interface, fit, then alternately raise orders on
/// faces failing the refinement criterion, refit, and (when `Δp_ref > 1`)
/// derefine, until nothing is refined or some element reaches `p_max`.
///
/// The mesh must be valid and at uniform order `p_init`.
pub fn run_rp_adaptivity<T: Real>(
    mesh: MixedOrderMesh<T>,
    field: &LevelSetField<T>,
    config: &TmopConfig<T>,
    plan: &AdaptivityPlan<T>,
) -> Result<AdaptResult<T>> {
    plan.validate()?;
    if mesh.elements.iter().any(|e| e.order != plan.p_init) {
        return Err(Error::InvalidArgument("initial mesh must be at uniform order p_init".into()));
    }
    let mut mesh = mesh;
    mark_interface(&mut mesh, field, plan.marking)?;
    let mut tracker = Tracker {
        min_det: T::infinity(),
        monotone: true,
        stalled: 0,
    };
    let (fitted, rep0) = r_adapt(mesh, field, config, &mut tracker)?;
    mesh = fitted;
    let mut history = vec![entry(0, &mesh, field, &rep0, 0, 0)?];
    let e_inf0 = history[0].max_error;
    let e_ref = plan.refine_threshold(e_inf0);
    let neighbors = mesh.neighbors();
    let mut base = mesh.orders();
    let cap = plan.max_outer_iterations();
    let mut exit = ExitReason::IterationCap;
    let mut outer = 0;
    for pass in 1..=cap {
        outer = pass;
        let report = FaceErrorReport::for_marked(&mesh, field)?;
        let faces = mark_for_refinement(&report, plan, Some(e_inf0));
        let scheduled = schedule_refinement(&mesh, &base, &faces, plan);
        let scheduled = edge_touching_elevation(&mesh, &scheduled, plan.edge_touch_elevation);
        if scheduled == base {
            exit = ExitReason::NothingRefined;
            break;
        }
        let reached_max = scheduled.iter().zip(&base).any(|(&n, &o)| n == plan.p_max && o < plan.p_max);
        base = scheduled;
        mesh.set_orders(&propagate_orders(&base, &neighbors, plan.dp))?;
        let (fitted, rep) = r_adapt(mesh, field, config, &mut tracker)?;
        mesh = fitted;
        let mut derefined = 0;
        if plan.dp_ref > 1 && plan.deref.is_some() {
            let optimized = FaceErrorReport::for_marked(&mesh, field)?;
            let reference = DerefReference {
                report: &optimized,
                e_ref,
            };
            let marked: Vec<usize> = mesh.marked_faces().iter().copied().collect();
            for f in marked {
                if let DerefOutcome::Accepted { mesh: m, min_det, .. } = try_derefine(&mesh, field, plan, f, &reference)? {
                    mesh = m;
                    derefined += 1;
                    tracker.min_det = tracker.min_det.min(min_det).min(mesh.min_det_jacobian().1);
                }
            }
            base = mesh.orders();
        }
        history.push(entry(pass, &mesh, field, &rep, faces.len(), derefined)?);
        if reached_max {
            exit = ExitReason::ReachedMaxOrder;
            break;
        }
    }
    Ok(AdaptResult {
        mesh,
        history,
        outer_iterations: outer,
        exit,
        min_det_seen: tracker.min_det,
        solves_monotone: tracker.monotone,
        stalled_solves: tracker.stalled,
    })
}
