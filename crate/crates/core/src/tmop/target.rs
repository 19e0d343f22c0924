use crate::error::{Error, Result};
use crate::fem::{Geometry, MixedOrderMesh};
use crate::linalg::Mat2;
use crate::scalar::Real;

/// How the per-element target matrix W is built.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec<T> {
    /// Identity for quads, unit equilateral triangle for triangles.
    Ideal,
    /// Ideal shape scaled so the target area equals the element's area at
    /// problem setup.
    IdealEqualSize,
    /// The same W for every element.
    Matrix(Mat2<T>),
    /// One W per element.
    PerElement(Vec<Mat2<T>>),
}

/// Ideal shape for a geometry.
pub fn ideal_target<T: Real>(geometry: Geometry) -> Mat2<T> {
    match geometry {
        Geometry::Triangle => Mat2::new(T::one(), T::c(0.5), T::zero(), T::c(3.0).sqrt() * T::c(0.5)),
        _ => Mat2::identity(),
    }
}

fn reference_measure<T: Real>(geometry: Geometry) -> T {
    match geometry {
        Geometry::Triangle => T::c(0.5),
        _ => T::one(),
    }
}

impl<T: Real> TargetSpec<T> {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ideal" => Ok(Self::Ideal),
            "ideal-size" | "ideal_equal_size" => Ok(Self::IdealEqualSize),
            _ => Err(Error::InvalidArgument(format!("unknown target '{name}'"))),
        }
    }

    /// W for every element of `mesh`.
    pub fn build(&self, mesh: &MixedOrderMesh<T>) -> Result<Vec<Mat2<T>>> {
        let w: Vec<Mat2<T>> = match self {
            Self::Ideal => mesh.elements.iter().map(|el| ideal_target(el.geometry)).collect(),
            Self::IdealEqualSize => mesh
                .elements
                .iter()
                .map(|el| {
                    let w = ideal_target::<T>(el.geometry);
                    let s = (el.area() / (w.det() * reference_measure::<T>(el.geometry))).sqrt();
                    w.scale(s)
                })
                .collect(),
            Self::Matrix(m) => vec![*m; mesh.elements.len()],
            Self::PerElement(v) => {
                if v.len() != mesh.elements.len() {
                    return Err(Error::InvalidArgument("one target per element required".into()));
                }
                v.clone()
            }
        };
        if let Some(e) = w.iter().position(|m| !(m.det() > T::zero())) {
            return Err(Error::InvalidArgument(format!("target for element {e} has det W <= 0")));
        }
        Ok(w)
    }
}
