use std::collections::BTreeSet;

use crate::adapt::face_error::{face_error, FaceErrorReport};
use crate::adapt::orders::propagate_orders;
use crate::adapt::plan::{AdaptivityPlan, DerefCriterion};
use crate::error::Result;
use crate::fem::MixedOrderMesh;
use crate::interp::LevelSetField;
use crate::scalar::Real;

/// Outcome of one derefinement attempt.
#[derive(Clone, Debug)]
pub enum DerefOutcome<T: Real> {
    Accepted {
        order: usize,
        /// Element orders after the change.
        orders: Vec<usize>,
        mesh: MixedOrderMesh<T>,
        min_det: T,
    },
    Rejected,
}

/// Reference values the criteria compare against: errors and lengths of the
/// optimized mesh, plus `e_ref` for the relative-to-reference criterion.
#[derive(Clone, Debug)]
pub struct DerefReference<'r, T> {
    pub report: &'r FaceErrorReport<T>,
    pub e_ref: T,
}

/// Tries orders `p̂ = p_init … p − 1` for `face` and returns the lowest one
/// that satisfies the criterion on every affected marked face and keeps the
/// changed elements and their neighbours valid.
///
/// For each `p̂` the variants are: lower both sides, then each side alone.
/// A variant is skipped when keeping `|Δp|` bounded would leave the face
/// above `p̂`. Changed elements are projected by interpolation.
pub fn try_derefine<T: Real>(
    mesh: &MixedOrderMesh<T>,
    field: &LevelSetField<T>,
    plan: &AdaptivityPlan<T>,
    face: usize,
    reference: &DerefReference<'_, T>,
) -> Result<DerefOutcome<T>> {
    let Some(criterion) = plan.deref else {
        return Ok(DerefOutcome::Rejected);
    };
    let p = mesh.edge_order(face);
    if p <= plan.p_init {
        return Ok(DerefOutcome::Rejected);
    }
    let current = mesh.orders();
    let neighbors = mesh.neighbors();
    let sides: Vec<usize> = mesh.edge(face).sides.iter().map(|s| s.element).collect();
    let mut variants: Vec<Vec<usize>> = vec![sides.clone()];
    if sides.len() == 2 {
        variants.push(vec![sides[0]]);
        variants.push(vec![sides[1]]);
    }
    for p_hat in plan.p_init..p {
        for lowered in &variants {
            let mut trial = current.clone();
            for &e in lowered {
                trial[e] = trial[e].min(p_hat);
            }
            let trial = propagate_orders(&trial, &neighbors, plan.dp);
            if trial == current {
                continue;
            }
            let face_order = sides.iter().map(|&e| trial[e]).min().unwrap_or(p);
            if face_order > p_hat {
                continue;
            }
            let mut candidate = mesh.clone();
            candidate.set_orders(&trial)?;
            let changed: Vec<usize> = (0..trial.len()).filter(|&e| trial[e] != current[e]).collect();
            let mut touched: BTreeSet<usize> = changed.iter().copied().collect();
            for &e in &changed {
                touched.extend(neighbors[e].iter().copied());
            }
            let min_det = touched
                .iter()
                .map(|&e| candidate.elements[e].min_det_jacobian())
                .fold(T::infinity(), T::min);
            if !(min_det > T::zero()) {
                continue;
            }
            let affected: BTreeSet<usize> = touched
                .iter()
                .flat_map(|&e| candidate.element_edges(e).iter().copied())
                .filter(|f| candidate.marked_faces().contains(f))
                .collect();
            let mut ok = true;
            for f in affected {
                let (Some(e_p), Some(l_p)) = (reference.report.error_of(f), reference.report.length_of(f)) else {
                    continue;
                };
                ok = match criterion {
                    DerefCriterion::RelToRef(b) => face_error(&candidate, field, f)? < b * reference.e_ref,
                    DerefCriterion::RelChange(b) => face_error(&candidate, field, f)? < (T::one() + b) * e_p,
                    DerefCriterion::SizeBased(b) => candidate.edge_length(f) > (T::one() - b) * l_p,
                };
                if !ok {
                    break;
                }
            }
            if ok {
                return Ok(DerefOutcome::Accepted {
                    order: p_hat,
                    orders: trial,
                    mesh: candidate,
                    min_det,
                });
            }
        }
    }
    Ok(DerefOutcome::Rejected)
}
