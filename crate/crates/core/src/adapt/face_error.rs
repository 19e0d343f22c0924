use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{gauss_legendre, points_for_order, MixedOrderMesh};
use crate::interp::LevelSetField;
use crate::scalar::Real;

/// `∫_f σ² ds` along the physical face, Gauss–Legendre at `2p + 3` points
/// of the face order.
pub fn face_error<T: Real>(mesh: &MixedOrderMesh<T>, field: &LevelSetField<T>, face: usize) -> Result<T> {
    let (ts, ws) = gauss_legendre::<T>(points_for_order(mesh.edge_order(face)))?;
    let mut e = T::zero();
    for (&t, &w) in ts.iter().zip(&ws) {
        let (x, speed) = mesh.edge_point_and_speed(face, t);
        let s = field.value(x)?;
        e += w * s * s * speed;
    }
    Ok(e)
}

/// Integrated errors and lengths of a face set, recomputed from scratch on
/// every call.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceErrorReport<T> {
    pub faces: Vec<usize>,
    pub errors: Vec<T>,
    pub lengths: Vec<T>,
    /// `e_F = Σ e_f`.
    pub total: T,
    /// `e_{F,∞}`.
    pub max: T,
    /// Largest `|σ|` at the Gauss–Lobatto nodes of the faces.
    pub node_sigma_max: T,
}

impl<T: Real> FaceErrorReport<T> {
    pub fn compute(mesh: &MixedOrderMesh<T>, field: &LevelSetField<T>, faces: &[usize]) -> Result<Self> {
        let per_face: Vec<(T, T, T)> = faces
            .par_iter()
            .map(|&f| {
                let e = face_error(mesh, field, f)?;
                let l = mesh.edge_length(f);
                let gll = mesh.elements[mesh.authoritative_side(f).element].reference();
                let p = mesh.edge_order(f);
                let nodes = if p == gll.order {
                    gll.gll.clone()
                } else {
                    crate::fem::gauss_lobatto_nodes::<T>(p)?
                };
                let mut smax = T::zero();
                for t in nodes {
                    smax = smax.max(field.value(mesh.edge_point(f, t))?.abs());
                }
                Ok((e, l, smax))
            })
            .collect::<Result<_>>()?;
        let errors: Vec<T> = per_face.iter().map(|v| v.0).collect();
        Ok(Self {
            faces: faces.to_vec(),
            lengths: per_face.iter().map(|v| v.1).collect(),
            total: errors.iter().copied().sum(),
            max: errors.iter().copied().fold(T::zero(), T::max),
            node_sigma_max: per_face.iter().fold(T::zero(), |m, v| m.max(v.2)),
            errors,
        })
    }

    /// Report over the mesh's marked faces.
    pub fn for_marked(mesh: &MixedOrderMesh<T>, field: &LevelSetField<T>) -> Result<Self> {
        let faces: Vec<usize> = mesh.marked_faces().iter().copied().collect();
        Self::compute(mesh, field, &faces)
    }

    pub fn error_of(&self, face: usize) -> Option<T> {
        self.faces.iter().position(|&f| f == face).map(|k| self.errors[k])
    }

    pub fn length_of(&self, face: usize) -> Option<T> {
        self.faces.iter().position(|&f| f == face).map(|k| self.lengths[k])
    }
}
