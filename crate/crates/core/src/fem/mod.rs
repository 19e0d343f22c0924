//! Reference elements, quadrature, the mixed-order mesh container and the
//! continuity constraints between elements of different order.

mod constraints;
mod mesh;
mod quadrature;
mod reference;

pub use constraints::{apply_edge_constraints, prolongation_matrix, DofMap, EdgeConstraint};
pub use mesh::{Edge, Element, MixedOrderMesh};
pub use quadrature::{gauss_legendre, gauss_lobatto_nodes, points_for_order, quadrature_rule, QuadratureRule};
pub use reference::{lagrange_1d, ReferenceElement};
pub(crate) use mesh::bbox as mesh_bbox;
pub use mesh::EdgeSide;

/// Reference-domain shape. Mesh elements are `Quadrilateral` or `Triangle`;
/// `Segment` exists for edge quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Geometry {
    Segment,
    Triangle,
    Quadrilateral,
}

impl Geometry {
    pub fn num_vertices(self) -> usize {
        match self {
            Geometry::Segment => 2,
            Geometry::Triangle => 3,
            Geometry::Quadrilateral => 4,
        }
    }

    pub fn num_edges(self) -> usize {
        match self {
            Geometry::Segment => 1,
            Geometry::Triangle => 3,
            Geometry::Quadrilateral => 4,
        }
    }

    /// Local vertex pair of local edge `le`, in local orientation.
    pub fn edge_vertices(self, le: usize) -> (usize, usize) {
        let n = self.num_vertices();
        (le, (le + 1) % n)
    }

    pub fn name(self) -> &'static str {
        match self {
            Geometry::Segment => "segment",
            Geometry::Triangle => "tri",
            Geometry::Quadrilateral => "quad",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tri" | "triangle" => Some(Geometry::Triangle),
            "quad" | "quadrilateral" => Some(Geometry::Quadrilateral),
            "segment" => Some(Geometry::Segment),
            _ => None,
        }
    }
}
