use rand::Rng;

use crate::error::{Error, Result};
use crate::fem::{DofMap, Geometry, MixedOrderMesh};
use crate::linalg::Vec2;
use crate::scalar::Real;

/// Structured `nx × ny` mesh of `[lo, hi]` at uniform order, quads or (with
/// `split`) two triangles per cell cut along the `(i,j)–(i+1,j+1)` diagonal.
/// Vertices are numbered row by row from `lo`.
pub fn generate_cartesian<T: Real>(
    nx: usize,
    ny: usize,
    order: usize,
    lo: Vec2<T>,
    hi: Vec2<T>,
    split: bool,
) -> Result<MixedOrderMesh<T>> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("nx and ny must be at least 1".into()));
    }
    if !(hi.x > lo.x && hi.y > lo.y) {
        return Err(Error::InvalidArgument("degenerate domain box".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let s = T::from_usize_lossy(i) / T::from_usize_lossy(nx);
            let t = T::from_usize_lossy(j) / T::from_usize_lossy(ny);
            vertices.push(Vec2::new(lo.x + (hi.x - lo.x) * s, lo.y + (hi.y - lo.y) * t));
        }
    }
    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let a = j * (nx + 1) + i;
            let (b, c, d) = (a + 1, a + nx + 2, a + nx + 1);
            if split {
                cells.push((Geometry::Triangle, vec![a, b, c], 0));
                cells.push((Geometry::Triangle, vec![a, c, d], 0));
            } else {
                cells.push((Geometry::Quadrilateral, vec![a, b, c, d], 0));
            }
        }
    }
    MixedOrderMesh::from_linear(vertices, &cells, order)
}

/// `generate_cartesian` on the unit square.
pub fn unit_square<T: Real>(nx: usize, ny: usize, order: usize, split: bool) -> Result<MixedOrderMesh<T>> {
    generate_cartesian(nx, ny, order, Vec2::zero(), Vec2::new(T::one(), T::one()), split)
}

/// Randomly displaces every true node not on the domain boundary by up to
/// `fraction` of the smallest element diameter per coordinate. The amplitude
/// is halved until the mesh is valid; returns the amplitude used.
pub fn perturb_interior<T: Real, R: Rng>(mesh: &mut MixedOrderMesh<T>, fraction: T, rng: &mut R) -> Result<T> {
    let dofs = DofMap::new(mesh)?;
    let mut on_boundary = vec![false; dofs.num_global];
    for (id, edge) in mesh.edges().iter().enumerate() {
        if edge.is_boundary() {
            for &g in &dofs.edge_nodes[id] {
                on_boundary[g] = true;
            }
        }
    }
    let h = mesh.elements.iter().map(|e| e.diameter()).fold(T::infinity(), T::min);
    let x0 = dofs.gather(mesh);
    let shifts: Vec<Vec2<T>> = (0..x0.len())
        .map(|_| Vec2::new(T::c(rng.gen_range(-1.0..1.0)), T::c(rng.gen_range(-1.0..1.0))))
        .collect();
    let mut amp = fraction * h;
    for _ in 0..30 {
        let x: Vec<Vec2<T>> = x0
            .iter()
            .zip(&shifts)
            .zip(&on_boundary)
            .map(|((&p, &s), &b)| if b { p } else { p + s * amp })
            .collect();
        let mut trial = mesh.clone();
        dofs.scatter(&x, &mut trial);
        if trial.is_valid() {
            *mesh = trial;
            return Ok(amp);
        }
        amp = amp * T::c(0.5);
    }
    Err(Error::InvalidArgument("could not find a valid perturbation".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = unit_square::<f64>(1, 1, 1, false).unwrap();
        assert_eq!((m.vertices.len(), m.elements.len()), (4, 1));
        let m = unit_square::<f64>(4, 4, 1, false).unwrap();
        assert_eq!((m.dof_count(), m.elements.len()), (25, 16));
        assert_eq!(unit_square::<f64>(4, 4, 3, false).unwrap().dof_count(), 13 * 13);
        let t = unit_square::<f64>(2, 3, 2, true).unwrap();
        assert_eq!(t.elements.len(), 12);
        assert!(t.is_valid());
        // P2 triangles on a 2×3 grid: the same nodes as Q2 minus the cell centers
        assert_eq!(t.dof_count(), 5 * 7);
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(generate_cartesian::<f64>(2, 2, 1, Vec2::zero(), Vec2::new(1.0, 0.0), false).is_err());
        assert!(unit_square::<f64>(0, 2, 1, false).is_err());
    }

    #[test]
    fn perturbation_keeps_boundary_and_validity() {
        use rand::SeedableRng;
        let mut m = unit_square::<f64>(3, 3, 2, false).unwrap();
        let before = m.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        perturb_interior(&mut m, 0.2, &mut rng).unwrap();
        assert!(m.is_valid());
        for (id, e) in m.edges().iter().enumerate() {
            if e.is_boundary() {
                for k in 0..=4 {
                    let t = k as f64 / 4.0;
                    assert!((m.edge_point(id, t) - before.edge_point(id, t)).norm() < 1e-15);
                }
            }
        }
        assert!(m.vertices[5] != before.vertices[5]);
    }
}
