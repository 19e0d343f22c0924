use crate::error::Result;
use crate::fem::MixedOrderMesh;
use crate::interp::LevelSetField;
use crate::scalar::Real;

/// Material attribute for elements whose center has `σ < 0`.
pub const INSIDE: i32 = 1;
/// Material attribute for elements whose center has `σ ≥ 0`.
pub const OUTSIDE: i32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MarkingMode {
    /// Faces between elements of different material.
    #[default]
    Interface,
    /// Domain-boundary faces of inside elements.
    Boundary,
}

/// Assigns materials by the sign of σ at element centers and marks the
/// faces to fit. Returns the number of marked faces.
pub fn mark_interface<T: Real>(mesh: &mut MixedOrderMesh<T>, field: &LevelSetField<T>, mode: MarkingMode) -> Result<usize> {
    for el in mesh.elements.iter_mut() {
        let s = field.value(el.center())?;
        el.attribute = if s < T::zero() { INSIDE } else { OUTSIDE };
    }
    let faces: Vec<usize> = mesh
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, edge)| match mode {
            MarkingMode::Interface => {
                edge.sides.len() == 2
                    && mesh.elements[edge.sides[0].element].attribute != mesh.elements[edge.sides[1].element].attribute
            }
            MarkingMode::Boundary => edge.is_boundary() && mesh.elements[edge.sides[0].element].attribute == INSIDE,
        })
        .map(|(id, _)| id)
        .collect();
    let n = faces.len();
    mesh.set_marked_faces(faces)?;
    Ok(n)
}
