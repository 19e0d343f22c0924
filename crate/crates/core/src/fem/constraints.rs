//! Continuity between elements of different order.
//!
//! On an edge shared by orders `p_lo ≤ p_hi`, the low-order edge trace is
//! authoritative. The high-order side's edge nodes are the interpolation of
//! that trace at its own Gauss–Lobatto points.

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fem::mesh::EdgeSide;
use crate::fem::quadrature::gauss_lobatto_nodes;
use crate::fem::reference::lagrange_1d;
use crate::fem::{MixedOrderMesh, ReferenceElement};
use crate::linalg::Vec2;
use crate::scalar::Real;

/// `(p_hi+1) × (p_lo+1)` matrix taking low-order edge values to the
/// high-order Gauss–Lobatto positions. Endpoint rows are exact unit rows.
pub fn prolongation_matrix<T: Real>(p_lo: usize, p_hi: usize) -> Result<Vec<Vec<T>>> {
    if p_lo > p_hi {
        return Err(Error::InvalidArgument(format!("prolongation from {p_lo} to lower order {p_hi}")));
    }
    let lo = gauss_lobatto_nodes::<T>(p_lo)?;
    let hi = gauss_lobatto_nodes::<T>(p_hi)?;
    let mut rows = Vec::with_capacity(p_hi + 1);
    for (k, &t) in hi.iter().enumerate() {
        let mut row = vec![T::zero(); p_lo + 1];
        if p_lo == p_hi {
            row[k] = T::one();
        } else if k == 0 {
            row[0] = T::one();
        } else if k == p_hi {
            row[p_lo] = T::one();
        } else {
            row = lagrange_1d(&lo, t).0;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Constraint relation on one mixed-order interior edge.
#[derive(Clone, Debug)]
pub struct EdgeConstraint<T> {
    pub edge: usize,
    pub p_lo: usize,
    pub p_hi: usize,
    pub low_side: EdgeSide,
    pub high_side: EdgeSide,
    pub matrix: Vec<Vec<T>>,
}

impl<T: Real> MixedOrderMesh<T> {
    /// All interior edges whose two sides have different orders.
    pub fn edge_constraints(&self) -> Result<Vec<EdgeConstraint<T>>> {
        let mut out = Vec::new();
        for (id, edge) in self.edges().iter().enumerate() {
            if edge.sides.len() != 2 {
                continue;
            }
            let low = self.authoritative_side(id);
            let high = if edge.sides[0] == low { edge.sides[1] } else { edge.sides[0] };
            let (p_lo, p_hi) = (self.elements[low.element].order, self.elements[high.element].order);
            if p_lo != p_hi {
                out.push(EdgeConstraint {
                    edge: id,
                    p_lo,
                    p_hi,
                    low_side: low,
                    high_side: high,
                    matrix: prolongation_matrix(p_lo, p_hi)?,
                });
            }
        }
        Ok(out)
    }
}

/// Edge trace values of one side in global orientation.
fn trace<T: Real>(mesh: &MixedOrderMesh<T>, side: EdgeSide) -> Vec<Vec2<T>> {
    let el = &mesh.elements[side.element];
    let mut v: Vec<Vec2<T>> = el.reference().edge_nodes(side.local_edge).iter().map(|&n| el.nodes[n]).collect();
    if !side.forward {
        v.reverse();
    }
    v
}

fn check_structure<T: Real>(mesh: &MixedOrderMesh<T>) -> Result<()> {
    for (id, edge) in mesh.edges().iter().enumerate() {
        for s in &edge.sides {
            let el = mesh.elements.get(s.element).ok_or_else(|| Error::Structural(format!("edge {id} names a missing element")))?;
            let (a, b) = el.geometry.edge_vertices(s.local_edge);
            let (a, b) = (el.vertices[a], el.vertices[b]);
            let expect = if s.forward { [a, b] } else { [b, a] };
            if expect != edge.vertices {
                return Err(Error::Structural(format!(
                    "edge {id} {:?} disagrees with element {} local edge {}",
                    edge.vertices, s.element, s.local_edge
                )));
            }
        }
    }
    Ok(())
}

/// Copies vertex coordinates into every element and overwrites the
/// non-authoritative side of each interior edge with the prolongated
/// authoritative trace. Idempotent.
pub fn apply_edge_constraints<T: Real>(mesh: &mut MixedOrderMesh<T>) -> Result<()> {
    check_structure(mesh)?;
    for e in 0..mesh.elements.len() {
        let nv = mesh.elements[e].geometry.num_vertices();
        for k in 0..nv {
            let v = mesh.elements[e].vertices[k];
            mesh.elements[e].nodes[k] = mesh.vertices[v];
        }
    }
    for id in 0..mesh.edges().len() {
        let edge = mesh.edge(id).clone();
        if edge.sides.len() != 2 {
            continue;
        }
        let low = mesh.authoritative_side(id);
        let high = if edge.sides[0] == low { edge.sides[1] } else { edge.sides[0] };
        let p_lo = mesh.elements[low.element].order;
        let p_hi = mesh.elements[high.element].order;
        let src = trace(mesh, low);
        let values: Vec<Vec2<T>> = if p_lo == p_hi {
            src
        } else {
            prolongation_matrix::<T>(p_lo, p_hi)?
                .iter()
                .map(|row| row.iter().zip(&src).fold(Vec2::zero(), |acc, (&w, &x)| acc + x * w))
                .collect()
        };
        let el = &mut mesh.elements[high.element];
        let list: Vec<usize> = el.reference().edge_nodes(high.local_edge).to_vec();
        for k in 1..p_hi {
            let g = if high.forward { k } else { p_hi - k };
            el.nodes[list[k]] = values[g];
        }
    }
    Ok(())
}

/// Linear map from conforming ("true") nodes to every element's local nodes.
///
/// Global numbering: mesh vertices, then the interior nodes of each edge at
/// the edge order (in global orientation), then element-interior nodes.
#[derive(Clone, Debug)]
pub struct DofMap<T> {
    pub num_global: usize,
    /// Per element, per local node: `(global node, weight)` terms.
    pub local: Vec<Vec<SmallVec<[(usize, T); 4]>>>,
    /// Per edge, global node ids along the edge including both endpoints.
    pub edge_nodes: Vec<Vec<usize>>,
}

impl<T: Real> DofMap<T> {
    pub fn new(mesh: &MixedOrderMesh<T>) -> Result<Self> {
        let mut next = mesh.vertices.len();
        let mut edge_nodes = Vec::with_capacity(mesh.edges().len());
        for (id, edge) in mesh.edges().iter().enumerate() {
            let p = mesh.edge_order(id);
            let mut list = vec![edge.vertices[0]];
            for _ in 1..p {
                list.push(next);
                next += 1;
            }
            list.push(edge.vertices[1]);
            edge_nodes.push(list);
        }
        let mut local = Vec::with_capacity(mesh.elements.len());
        for (e, el) in mesh.elements.iter().enumerate() {
            let re = el.reference();
            let mut map: Vec<SmallVec<[(usize, T); 4]>> = vec![SmallVec::new(); re.num_nodes()];
            for (k, &v) in el.vertices.iter().enumerate() {
                map[k].push((v, T::one()));
            }
            for (le, &id) in mesh.element_edges(e).iter().enumerate() {
                let side = mesh.edge(id).sides.iter().find(|s| s.element == e).copied().expect("side present");
                let p_edge = mesh.edge_order(id);
                let prol = if p_edge == el.order {
                    None
                } else {
                    Some(prolongation_matrix::<T>(p_edge, el.order)?)
                };
                let list = re.edge_nodes(le);
                for k in 1..el.order {
                    let g = if side.forward { k } else { el.order - k };
                    let terms = &mut map[list[k]];
                    match &prol {
                        None => terms.push((edge_nodes[id][g], T::one())),
                        Some(rows) => {
                            for (j, &w) in rows[g].iter().enumerate() {
                                terms.push((edge_nodes[id][j], w));
                            }
                        }
                    }
                }
            }
            for slot in map.iter_mut() {
                if slot.is_empty() {
                    slot.push((next, T::one()));
                    next += 1;
                }
            }
            debug_assert_eq!(
                map.len() - el.geometry.num_vertices() - el.geometry.num_edges() * (el.order - 1),
                ReferenceElement::<T>::interior_count(el.geometry, el.order)
            );
            local.push(map);
        }
        Ok(Self {
            num_global: next,
            local,
            edge_nodes,
        })
    }

    /// Reads the true node positions out of the mesh.
    pub fn gather(&self, mesh: &MixedOrderMesh<T>) -> Vec<Vec2<T>> {
        let mut x = vec![Vec2::zero(); self.num_global];
        let mut seen = vec![false; self.num_global];
        for (e, map) in self.local.iter().enumerate() {
            for (i, terms) in map.iter().enumerate() {
                if terms.len() == 1 && terms[0].1 == T::one() && !seen[terms[0].0] {
                    x[terms[0].0] = mesh.elements[e].nodes[i];
                    seen[terms[0].0] = true;
                }
            }
        }
        for (v, &p) in mesh.vertices.iter().enumerate() {
            x[v] = p;
        }
        x
    }

    /// Writes true node positions into the mesh, including constrained nodes.
    pub fn scatter(&self, x: &[Vec2<T>], mesh: &mut MixedOrderMesh<T>) {
        for (v, p) in mesh.vertices.iter_mut().enumerate() {
            *p = x[v];
        }
        for (e, map) in self.local.iter().enumerate() {
            let nodes = &mut mesh.elements[e].nodes;
            for (i, terms) in map.iter().enumerate() {
                nodes[i] = if terms.len() == 1 && terms[0].1 == T::one() {
                    x[terms[0].0]
                } else {
                    terms.iter().fold(Vec2::zero(), |acc, &(g, w)| acc + x[g] * w)
                };
            }
        }
    }

    /// Element-local node positions computed from true positions.
    pub fn element_nodes(&self, e: usize, x: &[Vec2<T>]) -> Vec<Vec2<T>> {
        self.local[e]
            .iter()
            .map(|terms| {
                if terms.len() == 1 && terms[0].1 == T::one() {
                    x[terms[0].0]
                } else {
                    terms.iter().fold(Vec2::zero(), |acc, &(g, w)| acc + x[g] * w)
                }
            })
            .collect()
    }
}
