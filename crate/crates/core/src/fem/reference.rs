//! Nodal Lagrange bases on the unit square and unit triangle.
//!
//! Node ordering is shared by both geometries: vertices first (counter-
//! clockwise from the origin), then the interior nodes of each local edge in
//! edge direction, then element-interior nodes. Edge nodes sit at
//! Gauss–Lobatto positions along the edge, so neighbouring elements of equal
//! order see identical edge traces.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::fem::quadrature::{gauss_lobatto_nodes, points_for_order, quadrature_rule, QuadratureRule};
use crate::fem::Geometry;
use crate::linalg::{solve_dense, Vec2};
use crate::scalar::Real;

/// Values and first derivatives of the 1D Lagrange polynomials through `nodes` at `x`.
pub fn lagrange_1d<T: Real>(nodes: &[T], x: T) -> (Vec<T>, Vec<T>) {
    let n = nodes.len();
    let mut val = vec![T::zero(); n];
    let mut der = vec![T::zero(); n];
    for i in 0..n {
        let mut denom = T::one();
        for j in 0..n {
            if j != i {
                denom *= nodes[i] - nodes[j];
            }
        }
        let mut prod = T::one();
        for j in 0..n {
            if j != i {
                prod *= x - nodes[j];
            }
        }
        val[i] = prod / denom;
        let mut d = T::zero();
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut term = T::one();
            for j in 0..n {
                if j != i && j != k {
                    term *= x - nodes[j];
                }
            }
            d += term;
        }
        der[i] = d / denom;
    }
    (val, der)
}

#[derive(Clone, Debug)]
enum Basis<T> {
    /// Tensor product of 1D Lagrange polynomials; `ij[n]` is the grid index of node `n`.
    Tensor { ij: Vec<(usize, usize)> },
    /// Monomials `x^a y^b`, `a + b ≤ p`, combined through the inverse Vandermonde.
    Monomial { exps: Vec<(usize, usize)>, coeffs: Vec<T> },
}

/// Basis and quadrature tables for one geometry at one order.
#[derive(Clone, Debug)]
pub struct ReferenceElement<T> {
    pub geometry: Geometry,
    pub order: usize,
    pub nodes: Vec<Vec2<T>>,
    /// Gauss–Lobatto points on `[0, 1]` at this order.
    pub gll: Vec<T>,
    basis: Basis<T>,
    edge_nodes: Vec<Vec<usize>>,
    /// Element rule with `2p + 3` points per direction.
    pub quadrature: QuadratureRule<T>,
    pub quad_values: Vec<Vec<T>>,
    pub quad_grads: Vec<Vec<Vec2<T>>>,
    /// Validity sample set: quadrature points followed by the nodes.
    pub sample_points: Vec<Vec2<T>>,
    pub sample_grads: Vec<Vec<Vec2<T>>>,
}

type CacheKey = (TypeId, Geometry, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<dyn Any + Send + Sync>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<dyn Any + Send + Sync>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl<T: Real> ReferenceElement<T> {
    /// Process-wide shared instance; construction happens once per key.
    pub fn shared(geometry: Geometry, order: usize) -> Result<Arc<Self>> {
        let key = (TypeId::of::<T>(), geometry, order);
        if let Some(hit) = cache().lock().unwrap().get(&key) {
            return Ok(hit.clone().downcast::<Self>().expect("cache entry type"));
        }
        let built = Arc::new(Self::new(geometry, order)?);
        cache()
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| built.clone() as Arc<dyn Any + Send + Sync>);
        Ok(built)
    }

    pub fn new(geometry: Geometry, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder(0));
        }
        let p = order;
        let gll = gauss_lobatto_nodes::<T>(p)?;
        let (nodes, basis, edge_nodes) = match geometry {
            Geometry::Quadrilateral => quad_layout(p, &gll),
            Geometry::Triangle => tri_layout(p, &gll)?,
            Geometry::Segment => return Err(Error::UnsupportedGeometry(geometry)),
        };
        let quadrature = quadrature_rule::<T>(geometry, points_for_order(p))?;
        let mut re = Self {
            geometry,
            order,
            nodes,
            gll,
            basis,
            edge_nodes,
            quadrature,
            quad_values: Vec::new(),
            quad_grads: Vec::new(),
            sample_points: Vec::new(),
            sample_grads: Vec::new(),
        };
        re.quad_values = re.quadrature.points.iter().map(|&x| re.eval_basis(x)).collect();
        re.quad_grads = re.quadrature.points.iter().map(|&x| re.eval_grads(x)).collect();
        re.sample_points = re.quadrature.points.iter().chain(re.nodes.iter()).copied().collect();
        re.sample_grads = re.sample_points.iter().map(|&x| re.eval_grads(x)).collect();
        Ok(re)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `(p+1)²` for quads, `(p+1)(p+2)/2` for triangles.
    pub fn node_count(geometry: Geometry, p: usize) -> usize {
        match geometry {
            Geometry::Quadrilateral => (p + 1) * (p + 1),
            Geometry::Triangle => (p + 1) * (p + 2) / 2,
            Geometry::Segment => p + 1,
        }
    }

    /// Element-interior node count (nodes not on any edge).
    pub fn interior_count(geometry: Geometry, p: usize) -> usize {
        match geometry {
            Geometry::Quadrilateral => (p - 1) * (p - 1),
            Geometry::Triangle => {
                if p < 3 {
                    0
                } else {
                    (p - 1) * (p - 2) / 2
                }
            }
            Geometry::Segment => p - 1,
        }
    }

    /// Local node indices along local edge `le` from its start to its end vertex.
    pub fn edge_nodes(&self, le: usize) -> &[usize] {
        &self.edge_nodes[le]
    }

    /// Reference point at parameter `t ∈ [0,1]` along local edge `le`.
    pub fn edge_point(&self, le: usize, t: T) -> Vec2<T> {
        edge_point(self.geometry, le, t)
    }

    /// Reference-space derivative of [`Self::edge_point`] with respect to `t`.
    pub fn edge_tangent(&self, le: usize) -> Vec2<T> {
        let (o, i) = (T::zero(), T::one());
        match (self.geometry, le) {
            (Geometry::Quadrilateral, 0) => Vec2::new(i, o),
            (Geometry::Quadrilateral, 1) => Vec2::new(o, i),
            (Geometry::Quadrilateral, 2) => Vec2::new(-i, o),
            (Geometry::Quadrilateral, _) => Vec2::new(o, -i),
            (Geometry::Triangle, 0) => Vec2::new(i, o),
            (Geometry::Triangle, 1) => Vec2::new(-i, i),
            (_, _) => Vec2::new(o, -i),
        }
    }

    /// Reference domain centre, used as the Newton start for point inversion.
    pub fn center(&self) -> Vec2<T> {
        match self.geometry {
            Geometry::Triangle => Vec2::new(T::one() / T::c(3.0), T::one() / T::c(3.0)),
            _ => Vec2::new(T::c(0.5), T::c(0.5)),
        }
    }

    /// True when `x` lies in the reference domain expanded by `tol`.
    pub fn contains(&self, x: Vec2<T>, tol: T) -> bool {
        match self.geometry {
            Geometry::Triangle => x.x >= -tol && x.y >= -tol && x.x + x.y <= T::one() + tol,
            _ => x.x >= -tol && x.y >= -tol && x.x <= T::one() + tol && x.y <= T::one() + tol,
        }
    }

    /// Closest point of the reference domain.
    pub fn project(&self, x: Vec2<T>) -> Vec2<T> {
        let clamp = |v: T| v.max(T::zero()).min(T::one());
        match self.geometry {
            Geometry::Triangle => {
                let mut px = x.x.max(T::zero());
                let mut py = x.y.max(T::zero());
                if px + py > T::one() {
                    // project onto x + y = 1, then clamp to the segment
                    let s = (x.x - x.y + T::one()) / T::c(2.0);
                    px = clamp(s);
                    py = T::one() - px;
                }
                Vec2::new(px, py)
            }
            _ => Vec2::new(clamp(x.x), clamp(x.y)),
        }
    }

    pub fn eval_basis(&self, x: Vec2<T>) -> Vec<T> {
        match &self.basis {
            Basis::Tensor { ij } => {
                let (lx, _) = lagrange_1d(&self.gll, x.x);
                let (ly, _) = lagrange_1d(&self.gll, x.y);
                ij.iter().map(|&(i, j)| lx[i] * ly[j]).collect()
            }
            Basis::Monomial { exps, coeffs } => {
                let n = exps.len();
                let m: Vec<T> = exps.iter().map(|&(a, b)| x.x.powi(a as i32) * x.y.powi(b as i32)).collect();
                (0..n).map(|i| (0..n).map(|j| m[j] * coeffs[j * n + i]).sum()).collect()
            }
        }
    }

    pub fn eval_grads(&self, x: Vec2<T>) -> Vec<Vec2<T>> {
        match &self.basis {
            Basis::Tensor { ij } => {
                let (lx, dx) = lagrange_1d(&self.gll, x.x);
                let (ly, dy) = lagrange_1d(&self.gll, x.y);
                ij.iter().map(|&(i, j)| Vec2::new(dx[i] * ly[j], lx[i] * dy[j])).collect()
            }
            Basis::Monomial { exps, coeffs } => {
                let n = exps.len();
                let pw = |v: T, k: usize| if k == 0 { T::one() } else { v.powi(k as i32) };
                let mx: Vec<T> = exps
                    .iter()
                    .map(|&(a, b)| if a == 0 { T::zero() } else { T::from_usize_lossy(a) * pw(x.x, a - 1) * pw(x.y, b) })
                    .collect();
                let my: Vec<T> = exps
                    .iter()
                    .map(|&(a, b)| if b == 0 { T::zero() } else { T::from_usize_lossy(b) * pw(x.x, a) * pw(x.y, b - 1) })
                    .collect();
                (0..n)
                    .map(|i| {
                        let gx = (0..n).map(|j| mx[j] * coeffs[j * n + i]).sum();
                        let gy = (0..n).map(|j| my[j] * coeffs[j * n + i]).sum();
                        Vec2::new(gx, gy)
                    })
                    .collect()
            }
        }
    }
}

pub(crate) fn edge_point<T: Real>(geometry: Geometry, le: usize, t: T) -> Vec2<T> {
    let (o, i) = (T::zero(), T::one());
    match (geometry, le) {
        (Geometry::Quadrilateral, 0) => Vec2::new(t, o),
        (Geometry::Quadrilateral, 1) => Vec2::new(i, t),
        (Geometry::Quadrilateral, 2) => Vec2::new(i - t, i),
        (Geometry::Quadrilateral, _) => Vec2::new(o, i - t),
        (Geometry::Triangle, 0) => Vec2::new(t, o),
        (Geometry::Triangle, 1) => Vec2::new(i - t, t),
        (_, _) => Vec2::new(o, i - t),
    }
}

type Layout<T> = (Vec<Vec2<T>>, Basis<T>, Vec<Vec<usize>>);

fn quad_layout<T: Real>(p: usize, g: &[T]) -> Layout<T> {
    // grid index of each node, in the shared vertex/edge/interior order
    let mut ij = vec![(0, 0), (p, 0), (p, p), (0, p)];
    let edge_ij = |le: usize, k: usize| match le {
        0 => (k, 0),
        1 => (p, k),
        2 => (p - k, p),
        _ => (0, p - k),
    };
    let mut edge_nodes = Vec::new();
    for le in 0..4 {
        let start = le;
        let end = (le + 1) % 4;
        let mut list = vec![start];
        for k in 1..p {
            list.push(ij.len());
            ij.push(edge_ij(le, k));
        }
        list.push(end);
        edge_nodes.push(list);
    }
    for j in 1..p {
        for i in 1..p {
            ij.push((i, j));
        }
    }
    let nodes = ij.iter().map(|&(i, j)| Vec2::new(g[i], g[j])).collect();
    (nodes, Basis::Tensor { ij }, edge_nodes)
}

/// Optimised blending exponents for the warp & blend triangle construction, `p < 16`.
const ALPHA_OPT: [f64; 15] = [
    0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832, 1.3648, 1.4773, 1.4959, 1.5743, 1.5770,
    1.6223, 1.6258,
];

/// Warp function mapping equispaced to Gauss–Lobatto positions along `r ∈ [-1, 1]`,
/// divided by the edge blend `1 - r²`.
fn warp_factor(p: usize, r: f64, gll: &[f64]) -> f64 {
    let req: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();
    let (l, _) = lagrange_1d(&req, r);
    let warp: f64 = (0..=p).map(|i| l[i] * (2.0 * gll[i] - 1.0 - req[i])).sum();
    if r.abs() < 1.0 - 1e-10 {
        warp / (1.0 - r * r)
    } else {
        0.0
    }
}

/// Interior nodes of the warp & blend point set, mapped to the unit triangle.
fn warp_blend_interior(p: usize) -> Vec<(f64, f64)> {
    let gll = gauss_lobatto_nodes::<f64>(p).expect("p >= 1");
    let alpha = if p < 16 { ALPHA_OPT[p - 1] } else { 5.0 / 3.0 };
    let s3 = 3f64.sqrt();
    let (c2, s2) = ((2.0 * std::f64::consts::PI / 3.0).cos(), (2.0 * std::f64::consts::PI / 3.0).sin());
    let (c4, s4) = ((4.0 * std::f64::consts::PI / 3.0).cos(), (4.0 * std::f64::consts::PI / 3.0).sin());
    let mut out = Vec::new();
    for n in 1..p {
        for m in 1..(p - n) {
            let l1 = n as f64 / p as f64;
            let l3 = m as f64 / p as f64;
            let l2 = 1.0 - l1 - l3;
            let mut x = -l2 + l3;
            let mut y = (-l2 - l3 + 2.0 * l1) / s3;
            let b1 = 4.0 * l2 * l3;
            let b2 = 4.0 * l1 * l3;
            let b3 = 4.0 * l1 * l2;
            let w1 = b1 * warp_factor(p, l3 - l2, &gll) * (1.0 + (alpha * l1).powi(2));
            let w2 = b2 * warp_factor(p, l1 - l3, &gll) * (1.0 + (alpha * l2).powi(2));
            let w3 = b3 * warp_factor(p, l2 - l1, &gll) * (1.0 + (alpha * l3).powi(2));
            x += w1 + c2 * w2 + c4 * w3;
            y += s2 * w2 + s4 * w3;
            // barycentrics of the equilateral vertices: L2 -> (-1,-1/√3), L3 -> (1,-1/√3), L1 -> (0, 2/√3)
            let lam1 = (y * s3 + 1.0) / 3.0;
            let lam3 = (x + 1.0 - lam1) / 2.0;
            out.push((lam3, lam1));
        }
    }
    out
}

fn tri_layout<T: Real>(p: usize, g: &[T]) -> Result<Layout<T>> {
    let (o, i) = (T::zero(), T::one());
    let mut nodes = vec![Vec2::new(o, o), Vec2::new(i, o), Vec2::new(o, i)];
    let mut edge_nodes = Vec::new();
    for le in 0..3 {
        let mut list = vec![le];
        for k in 1..p {
            list.push(nodes.len());
            let pt = match le {
                0 => Vec2::new(g[k], o),
                1 => Vec2::new(g[p - k], g[k]),
                _ => Vec2::new(o, g[p - k]),
            };
            nodes.push(pt);
        }
        list.push((le + 1) % 3);
        edge_nodes.push(list);
    }
    for (x, y) in warp_blend_interior(p) {
        nodes.push(Vec2::new(T::c(x), T::c(y)));
    }
    let mut exps = Vec::new();
    for total in 0..=p {
        for b in 0..=total {
            exps.push((total - b, b));
        }
    }
    let n = exps.len();
    debug_assert_eq!(n, nodes.len());
    let mut v = vec![T::zero(); n * n];
    for (r, x) in nodes.iter().enumerate() {
        for (c, &(a, b)) in exps.iter().enumerate() {
            v[r * n + c] = x.x.powi(a as i32) * x.y.powi(b as i32);
        }
    }
    let mut id = vec![T::zero(); n * n];
    for k in 0..n {
        id[k * n + k] = T::one();
    }
    let coeffs = solve_dense(v, id, n, n)
        .ok_or_else(|| Error::InvalidArgument(format!("singular triangle Vandermonde at order {p}")))?;
    Ok((nodes, Basis::Monomial { exps, coeffs }, edge_nodes))
}
