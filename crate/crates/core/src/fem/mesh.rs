use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fem::constraints::apply_edge_constraints;
use crate::fem::quadrature::{gauss_legendre, points_for_order};
use crate::fem::{Geometry, ReferenceElement};
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

/// One curved element: connectivity plus its `N_p` node coordinates.
#[derive(Clone, Debug)]
pub struct Element<T: Real> {
    pub geometry: Geometry,
    pub vertices: Vec<usize>,
    pub attribute: i32,
    pub order: usize,
    pub nodes: Vec<Vec2<T>>,
    reference: Arc<ReferenceElement<T>>,
}

impl<T: Real> Element<T> {
    pub fn new(geometry: Geometry, vertices: Vec<usize>, attribute: i32, order: usize, nodes: Vec<Vec2<T>>) -> Result<Self> {
        if vertices.len() != geometry.num_vertices() {
            return Err(Error::Structural(format!(
                "{} element needs {} vertices, got {}",
                geometry.name(),
                geometry.num_vertices(),
                vertices.len()
            )));
        }
        let reference = ReferenceElement::shared(geometry, order)?;
        if nodes.len() != reference.num_nodes() {
            return Err(Error::Structural(format!(
                "order-{order} {} element needs {} nodes, got {}",
                geometry.name(),
                reference.num_nodes(),
                nodes.len()
            )));
        }
        Ok(Self {
            geometry,
            vertices,
            attribute,
            order,
            nodes,
            reference,
        })
    }

    /// Straight-sided element whose nodes are the (bi)linear image of the reference nodes.
    pub fn straight(geometry: Geometry, vertices: Vec<usize>, attribute: i32, order: usize, coords: &[Vec2<T>]) -> Result<Self> {
        let corners: Vec<Vec2<T>> = vertices
            .iter()
            .map(|&v| coords.get(v).copied().ok_or_else(|| Error::Structural(format!("vertex {v} out of range"))))
            .collect::<Result<_>>()?;
        let lin = ReferenceElement::<T>::shared(geometry, 1)?;
        let reference = ReferenceElement::<T>::shared(geometry, order)?;
        let nodes = reference
            .nodes
            .iter()
            .map(|&xr| {
                let w = lin.eval_basis(xr);
                corners.iter().zip(&w).fold(Vec2::zero(), |acc, (&c, &wi)| acc + c * wi)
            })
            .collect();
        Self::new(geometry, vertices, attribute, order, nodes)
    }

    pub fn reference(&self) -> &ReferenceElement<T> {
        &self.reference
    }

    /// `x(x̄) = Σ_i x_i w̄_i(x̄)`.
    pub fn eval_map(&self, xr: Vec2<T>) -> Vec2<T> {
        let w = self.reference.eval_basis(xr);
        self.nodes.iter().zip(&w).fold(Vec2::zero(), |acc, (&x, &wi)| acc + x * wi)
    }

    /// `A_ab = Σ_i x_{i,a} ∂w̄_i/∂x̄_b`.
    pub fn eval_jacobian(&self, xr: Vec2<T>) -> Mat2<T> {
        jacobian_from_grads(&self.nodes, &self.reference.eval_grads(xr))
    }

    /// Minimum of `det A` over quadrature points and nodes.
    pub fn min_det_jacobian(&self) -> T {
        self.reference
            .sample_grads
            .iter()
            .map(|g| jacobian_from_grads(&self.nodes, g).det())
            .fold(T::infinity(), T::min)
    }

    /// Re-expresses the element at order `p` by interpolating the current map at the new nodes.
    pub fn projected(&self, p: usize) -> Result<Self> {
        if p == self.order {
            return Ok(self.clone());
        }
        let re = ReferenceElement::<T>::shared(self.geometry, p)?;
        let nodes = re.nodes.iter().map(|&xr| self.eval_map(xr)).collect();
        Self::new(self.geometry, self.vertices.clone(), self.attribute, p, nodes)
    }

    /// Local edge index joining global vertices `a` and `b`, with `true` when
    /// the local direction runs from `a` to `b`.
    pub fn local_edge(&self, a: usize, b: usize) -> Option<(usize, bool)> {
        (0..self.geometry.num_edges()).find_map(|le| {
            let (s, e) = self.geometry.edge_vertices(le);
            let (s, e) = (self.vertices[s], self.vertices[e]);
            if s == a && e == b {
                Some((le, true))
            } else if s == b && e == a {
                Some((le, false))
            } else {
                None
            }
        })
    }

    pub fn center(&self) -> Vec2<T> {
        self.eval_map(self.reference.center())
    }

    /// Diameter of the node cloud.
    pub fn diameter(&self) -> T {
        let (lo, hi) = bbox(&self.nodes);
        (hi - lo).norm()
    }

    /// Area by quadrature of `det A`.
    pub fn area(&self) -> T {
        let re = &self.reference;
        re.quad_grads
            .iter()
            .zip(&re.quadrature.weights)
            .map(|(g, &w)| w * jacobian_from_grads(&self.nodes, g).det())
            .sum()
    }
}

pub(crate) fn jacobian_from_grads<T: Real>(nodes: &[Vec2<T>], grads: &[Vec2<T>]) -> Mat2<T> {
    let mut a = Mat2::zero();
    for (x, g) in nodes.iter().zip(grads) {
        a.m[0][0] += x.x * g.x;
        a.m[0][1] += x.x * g.y;
        a.m[1][0] += x.y * g.x;
        a.m[1][1] += x.y * g.y;
    }
    a
}

pub(crate) fn bbox<T: Real>(pts: &[Vec2<T>]) -> (Vec2<T>, Vec2<T>) {
    let mut lo = Vec2::new(T::infinity(), T::infinity());
    let mut hi = Vec2::new(T::neg_infinity(), T::neg_infinity());
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Element adjacency of an edge. `forward` is true when the element's local
/// edge direction agrees with the global orientation `vertices[0] → vertices[1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSide {
    pub element: usize,
    pub local_edge: usize,
    pub forward: bool,
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Global orientation, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    pub sides: SmallVec<[EdgeSide; 2]>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.sides.len() == 1
    }
}

/// Curved mesh whose elements may carry different polynomial orders.
#[derive(Clone, Debug)]
pub struct MixedOrderMesh<T: Real> {
    pub vertices: Vec<Vec2<T>>,
    pub elements: Vec<Element<T>>,
    edges: Vec<Edge>,
    element_edges: Vec<Vec<usize>>,
    marked_faces: BTreeSet<usize>,
}

impl<T: Real> MixedOrderMesh<T> {
    /// Builds the edge table and checks vertex consistency; element nodes are taken as given.
    pub fn new(vertices: Vec<Vec2<T>>, elements: Vec<Element<T>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut edges: Vec<Edge> = Vec::new();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        for (e, el) in elements.iter().enumerate() {
            let mut ids = Vec::with_capacity(el.geometry.num_edges());
            for &v in &el.vertices {
                if v >= vertices.len() {
                    return Err(Error::Structural(format!("element {e} references vertex {v} out of range")));
                }
            }
            for le in 0..el.geometry.num_edges() {
                let (s, t) = el.geometry.edge_vertices(le);
                let (s, t) = (el.vertices[s], el.vertices[t]);
                if s == t {
                    return Err(Error::Structural(format!("element {e} has a degenerate edge")));
                }
                let key = (s.min(t), s.max(t));
                let side = EdgeSide {
                    element: e,
                    local_edge: le,
                    forward: s < t,
                };
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        sides: SmallVec::new(),
                    });
                    edges.len() - 1
                });
                if edges[id].sides.len() == 2 {
                    return Err(Error::Structural(format!("edge {key:?} shared by more than two elements")));
                }
                edges[id].sides.push(side);
                ids.push(id);
            }
            element_edges.push(ids);
        }
        Ok(Self {
            vertices,
            elements,
            edges,
            element_edges,
            marked_faces: BTreeSet::new(),
        })
    }

    /// Straight-sided uniform-order mesh from linear cells `(geometry, vertices, attribute)`.
    pub fn from_linear(vertices: Vec<Vec2<T>>, cells: &[(Geometry, Vec<usize>, i32)], order: usize) -> Result<Self> {
        let elements = cells
            .iter()
            .map(|(g, v, a)| Element::straight(*g, v.clone(), *a, order, &vertices))
            .collect::<Result<Vec<_>>>()?;
        let mut mesh = Self::new(vertices, elements)?;
        apply_edge_constraints(&mut mesh)?;
        Ok(mesh)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn element_edges(&self, e: usize) -> &[usize] {
        &self.element_edges[e]
    }

    pub fn orders(&self) -> Vec<usize> {
        self.elements.iter().map(|e| e.order).collect()
    }

    /// Governing order of an edge: the minimum over its adjacent elements.
    pub fn edge_order(&self, id: usize) -> usize {
        self.edges[id].sides.iter().map(|s| self.elements[s.element].order).min().unwrap_or(1)
    }

    /// Side whose edge trace is authoritative: lowest order, then lowest element id.
    pub fn authoritative_side(&self, id: usize) -> EdgeSide {
        *self.edges[id]
            .sides
            .iter()
            .min_by_key(|s| (self.elements[s.element].order, s.element))
            .expect("edge has a side")
    }

    /// Edge neighbours of each element, ascending.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.elements.len()];
        for edge in &self.edges {
            if edge.sides.len() == 2 {
                let (a, b) = (edge.sides[0].element, edge.sides[1].element);
                nb[a].push(b);
                nb[b].push(a);
            }
        }
        for v in &mut nb {
            v.sort_unstable();
            v.dedup();
        }
        nb
    }

    /// Elements incident to each vertex, ascending.
    pub fn vertex_elements(&self) -> Vec<Vec<usize>> {
        let mut ve = vec![Vec::new(); self.vertices.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for &v in &el.vertices {
                ve[v].push(e);
            }
        }
        ve
    }

    pub fn marked_faces(&self) -> &BTreeSet<usize> {
        &self.marked_faces
    }

    pub fn set_marked_faces<I: IntoIterator<Item = usize>>(&mut self, faces: I) -> Result<()> {
        let set: BTreeSet<usize> = faces.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&f| f >= self.edges.len()) {
            return Err(Error::InvalidArgument(format!("marked face {bad} out of range")));
        }
        self.marked_faces = set;
        Ok(())
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.element_edges
            .iter()
            .flatten()
            .copied()
            .find(|&id| self.edges[id].vertices == key)
    }

    /// Reference point on the given side for global edge parameter `t`.
    pub fn side_point(&self, side: EdgeSide, t: T) -> Vec2<T> {
        let lt = if side.forward { t } else { T::one() - t };
        self.elements[side.element].reference().edge_point(side.local_edge, lt)
    }

    /// Physical position at global parameter `t` along an edge, from the authoritative side.
    pub fn edge_point(&self, id: usize, t: T) -> Vec2<T> {
        let side = self.authoritative_side(id);
        self.elements[side.element].eval_map(self.side_point(side, t))
    }

    /// Position and `|dx/dt|` at global parameter `t`.
    pub fn edge_point_and_speed(&self, id: usize, t: T) -> (Vec2<T>, T) {
        let side = self.authoritative_side(id);
        let el = &self.elements[side.element];
        let xr = self.side_point(side, t);
        let a = el.eval_jacobian(xr);
        let speed = a.mul_vec(el.reference().edge_tangent(side.local_edge)).norm();
        (el.eval_map(xr), speed)
    }

    /// Arc length by Gauss quadrature at `2p + 3` points of the edge order.
    pub fn edge_length(&self, id: usize) -> T {
        let (x, w) = gauss_legendre::<T>(points_for_order(self.edge_order(id))).expect("n >= 1");
        x.iter().zip(&w).map(|(&t, &wq)| wq * self.edge_point_and_speed(id, t).1).sum()
    }

    /// `(element, min det A)` over all elements; the mesh is valid when the value is positive.
    pub fn min_det_jacobian(&self) -> (usize, T) {
        self.elements
            .iter()
            .enumerate()
            .map(|(e, el)| (e, el.min_det_jacobian()))
            .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a })
    }

    pub fn is_valid(&self) -> bool {
        self.min_det_jacobian().1 > T::zero()
    }

    pub fn check_valid(&self) -> Result<()> {
        let (element, d) = self.min_det_jacobian();
        if d > T::zero() {
            Ok(())
        } else {
            Err(Error::InvalidMesh {
                element,
                min_det: d.to_f64_lossy(),
            })
        }
    }

    /// Sets per-element orders, projecting changed elements by interpolation,
    /// then re-applies the edge constraints.
    pub fn set_orders(&mut self, orders: &[usize]) -> Result<()> {
        if orders.len() != self.elements.len() {
            return Err(Error::InvalidArgument("order vector length mismatch".into()));
        }
        for (el, &p) in self.elements.iter_mut().zip(orders) {
            if el.order != p {
                *el = el.projected(p)?;
            }
        }
        apply_edge_constraints(self)
    }

    pub fn bounding_box(&self) -> (Vec2<T>, Vec2<T>) {
        let all: Vec<Vec2<T>> = self.elements.iter().flat_map(|e| e.nodes.iter().copied()).collect();
        bbox(&all)
    }

    pub fn diameter(&self) -> T {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn order_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for el in &self.elements {
            *h.entry(el.order).or_insert(0) += 1;
        }
        h
    }

    /// Conforming DOF count: vertices + Σ_edges (p_edge − 1) + element interiors.
    pub fn dof_count(&self) -> usize {
        let edge: usize = (0..self.edges.len()).map(|i| self.edge_order(i) - 1).sum();
        let interior: usize = self
            .elements
            .iter()
            .map(|e| ReferenceElement::<T>::interior_count(e.geometry, e.order))
            .sum();
        self.vertices.len() + edge + interior
    }
}
