use std::collections::{BTreeSet, VecDeque};

use crate::adapt::face_error::FaceErrorReport;
use crate::adapt::plan::{AdaptivityPlan, RefineCriterion};
use crate::fem::MixedOrderMesh;
use crate::scalar::Real;

/// Faces failing the plan's refinement criterion. For the relative
/// criterion, `reference_max` replaces the report's own `e_{F,∞}` when given.
pub fn mark_for_refinement<T: Real>(
    report: &FaceErrorReport<T>,
    plan: &AdaptivityPlan<T>,
    reference_max: Option<T>,
) -> Vec<usize> {
    let e_inf = reference_max.unwrap_or(report.max);
    report
        .faces
        .iter()
        .zip(&report.errors)
        .filter(|(_, &e)| match plan.refine {
            RefineCriterion::Absolute(g) => e > g,
            RefineCriterion::Relative(g) => e >= g * e_inf,
        })
        .map(|(&f, _)| f)
        .collect()
}

/// Raises both sides of every listed face to `min(p_max, p_f + Δp_ref)`,
/// where `p_f` is the face's current order. Orders never decrease.
pub fn schedule_refinement<T: Real>(
    mesh: &MixedOrderMesh<T>,
    base: &[usize],
    faces: &[usize],
    plan: &AdaptivityPlan<T>,
) -> Vec<usize> {
    let mut out = base.to_vec();
    for &f in faces {
        let target = (mesh.edge_order(f) + plan.dp_ref).min(plan.p_max);
        for side in &mesh.edge(f).sides {
            out[side.element] = out[side.element].max(target);
        }
    }
    out
}

/// Least fixpoint above `orders` in which edge neighbours differ by at most
/// `dp`: every element ends at `max(p_e, max_f (p_f − dp·dist(e, f)))`.
pub fn propagate_orders(orders: &[usize], neighbors: &[Vec<usize>], dp: usize) -> Vec<usize> {
    let mut p = orders.to_vec();
    let mut queue: VecDeque<usize> = (0..p.len()).collect();
    while let Some(e) = queue.pop_front() {
        for &n in &neighbors[e] {
            if p[e] > p[n] + dp {
                p[n] = p[e] - dp;
                queue.push_back(n);
            }
        }
    }
    p
}

/// Raises an element with no marked face to `q` when, at one of its
/// vertices, both edge neighbours through that vertex carry a marked face
/// and share order `q`.
pub fn edge_touching_elevation<T: Real>(mesh: &MixedOrderMesh<T>, orders: &[usize], enabled: bool) -> Vec<usize> {
    let mut out = orders.to_vec();
    if !enabled {
        return out;
    }
    let marked = mesh.marked_faces();
    let on_interface: Vec<bool> = (0..mesh.elements.len())
        .map(|e| mesh.element_edges(e).iter().any(|f| marked.contains(f)))
        .collect();
    for (e, el) in mesh.elements.iter().enumerate() {
        if on_interface[e] {
            continue;
        }
        let nv = el.geometry.num_vertices();
        for k in 0..nv {
            // local edges meeting at local vertex k: (k−1 → k) and (k → k+1)
            let edges = [mesh.element_edges(e)[(k + nv - 1) % nv], mesh.element_edges(e)[k]];
            let nbrs: BTreeSet<usize> = edges
                .iter()
                .filter_map(|&id| mesh.edge(id).sides.iter().map(|s| s.element).find(|&o| o != e))
                .collect();
            if nbrs.len() != 2 || !nbrs.iter().all(|&n| on_interface[n]) {
                continue;
            }
            let qs: Vec<usize> = nbrs.iter().map(|&n| orders[n]).collect();
            if qs[0] == qs[1] && qs[0] > out[e] {
                out[e] = qs[0];
            }
        }
    }
    out
}
