//! Point location in a curved mesh: bounding-box hash grid for candidates,
//! Newton inversion of the element map for reference coordinates.

use crate::error::{Error, Result};
use crate::fem::MixedOrderMesh;
use crate::linalg::Vec2;
use crate::scalar::Real;

const MAX_NEWTON: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoundStatus {
    /// Inside an element's reference domain (up to `1e-10`).
    Interior,
    /// Marginally outside the mesh; reference point snapped to the element boundary.
    Border,
    NotFound,
}

/// Result of locating one physical point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComputationalCoords<T> {
    pub element: usize,
    pub reference: Vec2<T>,
    pub status: FoundStatus,
    /// `|Φ(x̄*) − x*|`.
    pub residual: T,
    pub newton_iterations: usize,
}

impl<T: Real> ComputationalCoords<T> {
    pub fn found(&self) -> bool {
        self.status != FoundStatus::NotFound
    }
}

/// Immutable search structure over a background mesh.
#[derive(Clone, Debug)]
pub struct Locator<T: Real> {
    mesh: MixedOrderMesh<T>,
    boxes: Vec<(Vec2<T>, Vec2<T>)>,
    origin: Vec2<T>,
    cell: Vec2<T>,
    dims: (usize, usize),
    cells: Vec<Vec<usize>>,
    diameter: T,
}

impl<T: Real> Locator<T> {
    pub fn new(mesh: &MixedOrderMesh<T>) -> Result<Self> {
        if mesh.elements.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let boxes: Vec<(Vec2<T>, Vec2<T>)> = mesh
            .elements
            .iter()
            .map(|el| {
                let (lo, hi) = crate::fem::mesh_bbox(&el.nodes);
                let pad = (hi - lo).norm() * T::c(0.01);
                (lo - Vec2::new(pad, pad), hi + Vec2::new(pad, pad))
            })
            .collect();
        let mut lo = boxes[0].0;
        let mut hi = boxes[0].1;
        for b in &boxes {
            lo = Vec2::new(lo.x.min(b.0.x), lo.y.min(b.0.y));
            hi = Vec2::new(hi.x.max(b.1.x), hi.y.max(b.1.y));
        }
        let n = (mesh.elements.len() as f64).sqrt().ceil().max(1.0) as usize;
        let ext = hi - lo;
        let (nx, ny) = if ext.x >= ext.y {
            let ny = ((n as f64) * (ext.y / ext.x).to_f64_lossy()).ceil().max(1.0) as usize;
            (n, ny)
        } else {
            let nx = ((n as f64) * (ext.x / ext.y).to_f64_lossy()).ceil().max(1.0) as usize;
            (nx, n)
        };
        let cell = Vec2::new(ext.x / T::from_usize_lossy(nx), ext.y / T::from_usize_lossy(ny));
        let mut cells = vec![Vec::new(); nx * ny];
        let index = |v: T, o: T, h: T, n: usize| -> usize {
            let k = ((v - o) / h).floor().to_f64_lossy();
            (k.max(0.0) as usize).min(n - 1)
        };
        for (e, b) in boxes.iter().enumerate() {
            let (i0, i1) = (index(b.0.x, lo.x, cell.x, nx), index(b.1.x, lo.x, cell.x, nx));
            let (j0, j1) = (index(b.0.y, lo.y, cell.y, ny), index(b.1.y, lo.y, cell.y, ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * nx + i].push(e);
                }
            }
        }
        Ok(Self {
            diameter: mesh.diameter(),
            mesh: mesh.clone(),
            boxes,
            origin: lo,
            cell,
            dims: (nx, ny),
            cells,
        })
    }

    pub fn mesh(&self) -> &MixedOrderMesh<T> {
        &self.mesh
    }

    pub fn diameter(&self) -> T {
        self.diameter
    }

    /// Elements whose inflated box contains `x`, ascending by id.
    pub fn candidates(&self, x: Vec2<T>) -> Vec<usize> {
        let (nx, ny) = self.dims;
        let rel = x - self.origin;
        let fi = (rel.x / self.cell.x).floor().to_f64_lossy();
        let fj = (rel.y / self.cell.y).floor().to_f64_lossy();
        let slack = 1e-9;
        if !(fi >= -slack && fj >= -slack && fi < nx as f64 + slack && fj < ny as f64 + slack) {
            return Vec::new();
        }
        let i = (fi.max(0.0) as usize).min(nx - 1);
        let j = (fj.max(0.0) as usize).min(ny - 1);
        let mut out: Vec<usize> = self.cells[j * nx + i]
            .iter()
            .copied()
            .filter(|&e| {
                let (lo, hi) = self.boxes[e];
                x.x >= lo.x && x.x <= hi.x && x.y >= lo.y && x.y <= hi.y
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Newton inversion of element `e`'s map; returns `(x̄, residual, iterations)`.
    pub fn invert(&self, e: usize, x: Vec2<T>) -> (Vec2<T>, T, usize) {
        let el = &self.mesh.elements[e];
        let tol = T::tol(1e-12) * self.diameter;
        let (lo, hi) = (T::c(-0.5), T::c(1.5));
        let mut xr = el.reference().center();
        let mut res = (el.eval_map(xr) - x).norm();
        let mut it = 0;
        while it < MAX_NEWTON && res > tol {
            let r = el.eval_map(xr) - x;
            let Some(inv) = el.eval_jacobian(xr).inverse() else { break };
            let dx = inv.mul_vec(r);
            xr = Vec2::new((xr.x - dx.x).max(lo).min(hi), (xr.y - dx.y).max(lo).min(hi));
            res = (el.eval_map(xr) - x).norm();
            it += 1;
        }
        (xr, res, it)
    }

    /// Closest reference point within the element (projected Gauss–Newton).
    fn invert_projected(&self, e: usize, start: Vec2<T>, x: Vec2<T>) -> (Vec2<T>, T) {
        let el = &self.mesh.elements[e];
        let re = el.reference();
        let mut xr = re.project(start);
        let mut res = (el.eval_map(xr) - x).norm();
        for _ in 0..MAX_NEWTON {
            let r = el.eval_map(xr) - x;
            let Some(inv) = el.eval_jacobian(xr).inverse() else { break };
            let cand = re.project(xr - inv.mul_vec(r));
            let cres = (el.eval_map(cand) - x).norm();
            if cres >= res {
                break;
            }
            xr = cand;
            res = cres;
        }
        (xr, res)
    }

    pub fn locate(&self, x: Vec2<T>) -> ComputationalCoords<T> {
        let inside_tol = T::tol(1e-10);
        let conv_tol = T::tol(1e-12) * self.diameter;
        let border_tol = T::tol(1e-8) * self.diameter;
        let mut border: Option<ComputationalCoords<T>> = None;
        for e in self.candidates(x) {
            let (xr, res, it) = self.invert(e, x);
            let re = self.mesh.elements[e].reference();
            if res <= conv_tol && re.contains(xr, inside_tol) {
                return ComputationalCoords {
                    element: e,
                    reference: xr,
                    status: FoundStatus::Interior,
                    residual: res,
                    newton_iterations: it,
                };
            }
            let (pr, pres) = self.invert_projected(e, xr, x);
            if pres <= border_tol && border.is_none_or(|b| pres < b.residual) {
                border = Some(ComputationalCoords {
                    element: e,
                    reference: pr,
                    status: FoundStatus::Border,
                    residual: pres,
                    newton_iterations: it,
                });
            }
        }
        border.unwrap_or(ComputationalCoords {
            element: usize::MAX,
            reference: Vec2::zero(),
            status: FoundStatus::NotFound,
            residual: T::infinity(),
            newton_iterations: 0,
        })
    }
}
