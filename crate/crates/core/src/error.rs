use thiserror::Error;

use crate::fem::Geometry;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial order {0} is not supported (orders start at 1)")]
    InvalidOrder(usize),
    #[error("geometry {0:?} is not supported here")]
    UnsupportedGeometry(Geometry),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inconsistent mesh structure: {0}")]
    Structural(String),
    #[error("mesh is invalid: element {element} has min det(A) = {min_det:e}")]
    InvalidMesh { element: usize, min_det: f64 },
    #[error("point ({x}, {y}) is outside the background mesh")]
    NotFound { x: f64, y: f64 },
    #[error("mesh has no elements")]
    EmptyMesh,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
