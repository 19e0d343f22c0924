use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fem::{DofMap, MixedOrderMesh};
use crate::interp::LevelSetField;
use crate::linalg::{CsrMatrix, Mat2, Vec2};
use crate::scalar::Real;
use crate::tmop::metric::QualityMetric;
use crate::tmop::target::TargetSpec;

/// Knobs of the r-adaptivity driver.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverControls<T> {
    pub max_iterations: usize,
    /// Stop once `max_{s∈S} |σ(x_s)| ≤ fit_tol`.
    pub fit_tol: T,
    /// Backtracking halvings per line search.
    pub max_halvings: usize,
    /// Multiplier applied to the fitting weight when `|σ|_∞` stagnates.
    pub weight_factor: T,
    pub weight_cap: T,
    /// Stagnation means `|σ|_∞` shrank by less than this factor in one iteration.
    pub weight_trigger: T,
    /// Stop once `‖g‖ ≤ grad_rtol · ‖g₀‖`.
    pub grad_rtol: T,
    pub cg_rtol: T,
    pub cg_max_iterations: usize,
}

impl<T: Real> Default for SolverControls<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            fit_tol: T::c(1e-8),
            max_halvings: 12,
            weight_factor: T::c(10.0),
            weight_cap: T::c(1e10),
            weight_trigger: T::c(1.1),
            grad_rtol: T::c(1e-12),
            cg_rtol: T::c(1e-10),
            cg_max_iterations: 2000,
        }
    }
}

/// Everything needed to set up a [`TmopProblem`] apart from mesh and level set.
#[derive(Clone, Debug, PartialEq)]
pub struct TmopConfig<T> {
    pub metric: QualityMetric<T>,
    pub target: TargetSpec<T>,
    /// Initial `w_σ`.
    pub fit_weight: T,
    pub controls: SolverControls<T>,
}

impl<T: Real> Default for TmopConfig<T> {
    fn default() -> Self {
        Self {
            metric: QualityMetric::Shape2,
            target: TargetSpec::Ideal,
            fit_weight: T::one(),
            controls: SolverControls::default(),
        }
    }
}

/// Movement allowed for a true node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeFreedom<T> {
    Free,
    /// Tangential motion along a unit direction (straight domain boundary).
    Slide(Vec2<T>),
    Fixed,
}

type Reduced<T> = SmallVec<[(usize, Vec2<T>); 2]>;

/// Fitting-augmented TMOP objective
/// `F(x) = Σ_e Σ_q w_q det(W) μ(T) + w_σ Σ_{s∈S} σ(x_s)²`
/// over the true (unconstrained) node positions of a mixed-order mesh.
///
/// Positions are passed around as one `Vec2` per true node in [`DofMap`]
/// numbering; reduced coordinates add the boundary policy on top.
pub struct TmopProblem<'a, T: Real> {
    pub mesh: MixedOrderMesh<T>,
    pub field: &'a LevelSetField<T>,
    pub metric: QualityMetric<T>,
    pub fit_weight: T,
    pub controls: SolverControls<T>,
    targets: Vec<Mat2<T>>,
    dofs: DofMap<T>,
    freedom: Vec<NodeFreedom<T>>,
    reduced: Vec<Reduced<T>>,
    num_reduced: usize,
    marked_nodes: Vec<usize>,
    local_reduced: Vec<Vec<SmallVec<[(usize, Vec2<T>); 4]>>>,
}

struct ElementTerms<T> {
    value: T,
    grad: Vec<Vec2<T>>,
    /// `(2N)²` row-major, index `2i + a`.
    hess: Vec<T>,
}

impl<'a, T: Real> TmopProblem<'a, T> {
    /// Sets up the problem on the mesh's current marked faces.
    /// The mesh must be valid.
    pub fn new(mesh: MixedOrderMesh<T>, field: &'a LevelSetField<T>, config: &TmopConfig<T>) -> Result<Self> {
        mesh.check_valid()?;
        if !(config.fit_weight >= T::zero()) {
            return Err(Error::InvalidArgument("fitting weight must be non-negative".into()));
        }
        let targets = config.target.build(&mesh)?;
        let dofs = DofMap::new(&mesh)?;
        let freedom = boundary_freedom(&mesh, &dofs);
        let mut reduced = Vec::with_capacity(freedom.len());
        let mut next = 0;
        for f in &freedom {
            let mut r = Reduced::new();
            match *f {
                NodeFreedom::Free => {
                    r.push((next, Vec2::new(T::one(), T::zero())));
                    r.push((next + 1, Vec2::new(T::zero(), T::one())));
                    next += 2;
                }
                NodeFreedom::Slide(d) => {
                    r.push((next, d));
                    next += 1;
                }
                NodeFreedom::Fixed => {}
            }
            reduced.push(r);
        }
        let local_reduced = dofs
            .local
            .iter()
            .map(|map| {
                map.iter()
                    .map(|terms| {
                        let mut out = SmallVec::new();
                        for &(g, w) in terms {
                            for &(r, c) in &reduced[g] {
                                out.push((r, c * w));
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        let mut marked_nodes: Vec<usize> = mesh
            .marked_faces()
            .iter()
            .flat_map(|&f| dofs.edge_nodes[f].iter().copied())
            .collect();
        marked_nodes.sort_unstable();
        marked_nodes.dedup();
        Ok(Self {
            mesh,
            field,
            metric: config.metric,
            fit_weight: config.fit_weight,
            controls: config.controls.clone(),
            targets,
            dofs,
            freedom,
            reduced,
            num_reduced: next,
            marked_nodes,
            local_reduced,
        })
    }

    pub fn dofs(&self) -> &DofMap<T> {
        &self.dofs
    }

    pub fn targets(&self) -> &[Mat2<T>] {
        &self.targets
    }

    /// The marked node set S (true node ids on marked faces).
    pub fn marked_nodes(&self) -> &[usize] {
        &self.marked_nodes
    }

    pub fn freedom(&self) -> &[NodeFreedom<T>] {
        &self.freedom
    }

    pub fn num_reduced(&self) -> usize {
        self.num_reduced
    }

    /// Reduced unknowns grouped by node (1 or 2 per group).
    pub fn reduced_groups(&self) -> Vec<Vec<usize>> {
        self.reduced
            .iter()
            .filter(|r| !r.is_empty())
            .map(|r| r.iter().map(|t| t.0).collect())
            .collect()
    }

    /// Current true node positions.
    pub fn positions(&self) -> Vec<Vec2<T>> {
        self.dofs.gather(&self.mesh)
    }

    /// `x + α·B·dz`.
    pub fn displaced(&self, x: &[Vec2<T>], dz: &[T], alpha: T) -> Vec<Vec2<T>> {
        x.iter()
            .zip(&self.reduced)
            .map(|(&p, r)| r.iter().fold(p, |acc, &(k, c)| acc + c * (alpha * dz[k])))
            .collect()
    }

    /// Writes positions back into the mesh (constrained nodes included).
    pub fn commit(&mut self, x: &[Vec2<T>]) {
        self.dofs.scatter(x, &mut self.mesh);
    }

    fn element_nodes(&self, e: usize, x: &[Vec2<T>]) -> Vec<Vec2<T>> {
        self.dofs.element_nodes(e, x)
    }

    /// Minimum `det A` over quadrature points and nodes of every element.
    pub fn min_det(&self, x: &[Vec2<T>]) -> T {
        (0..self.mesh.elements.len())
            .into_par_iter()
            .map(|e| {
                let nodes = self.element_nodes(e, x);
                self.mesh.elements[e]
                    .reference()
                    .sample_grads
                    .iter()
                    .map(|g| jacobian(&nodes, g).det())
                    .fold(T::infinity(), T::min)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(T::infinity(), T::min)
    }

    fn element_terms(&self, e: usize, nodes: &[Vec2<T>], level: u8) -> ElementTerms<T> {
        let re = self.mesh.elements[e].reference();
        let n = nodes.len();
        let w = self.targets[e];
        let winv = w.inverse().expect("det W > 0");
        let winv_t = winv.transpose();
        let detw = w.det();
        let mut out = ElementTerms {
            value: T::zero(),
            grad: if level >= 1 { vec![Vec2::zero(); n] } else { Vec::new() },
            hess: if level >= 2 { vec![T::zero(); 4 * n * n] } else { Vec::new() },
        };
        let mut r = vec![Vec2::zero(); n];
        let mut q = vec![[T::zero(); 8]; n];
        for (grads, &wq) in re.quad_grads.iter().zip(&re.quadrature.weights) {
            let t = jacobian(nodes, grads).matmul(&winv);
            let scale = wq * detw;
            if level == 0 {
                out.value += scale * self.metric.value(&t);
                continue;
            }
            let (mu, p, h) = if level >= 2 {
                self.metric.second(&t)
            } else {
                let (v, g) = self.metric.first(&t);
                (v, g, [[T::zero(); 4]; 4])
            };
            out.value += scale * mu;
            if !mu.is_finite() {
                continue;
            }
            for (ri, &g) in r.iter_mut().zip(grads) {
                *ri = winv_t.mul_vec(g);
            }
            for (gi, ri) in out.grad.iter_mut().zip(&r) {
                gi.x += scale * (p[0] * ri.x + p[1] * ri.y);
                gi.y += scale * (p[2] * ri.x + p[3] * ri.y);
            }
            if level >= 2 {
                // q_j[(a,b), c] = Σ_d H[(a,b),(c,d)] r_jd
                for (qj, rj) in q.iter_mut().zip(&r) {
                    for ab in 0..4 {
                        for c in 0..2 {
                            qj[2 * ab + c] = h[ab][2 * c] * rj.x + h[ab][2 * c + 1] * rj.y;
                        }
                    }
                }
                let dim = 2 * n;
                for (i, ri) in r.iter().enumerate() {
                    for (j, qj) in q.iter().enumerate() {
                        for a in 0..2 {
                            for c in 0..2 {
                                let k = ri.x * qj[2 * (2 * a) + c] + ri.y * qj[2 * (2 * a + 1) + c];
                                out.hess[(2 * i + a) * dim + 2 * j + c] += scale * k;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn all_terms(&self, x: &[Vec2<T>], level: u8) -> Vec<ElementTerms<T>> {
        (0..self.mesh.elements.len())
            .into_par_iter()
            .map(|e| self.element_terms(e, &self.element_nodes(e, x), level))
            .collect()
    }

    /// `σ` and `∇σ` at every marked node, in [`Self::marked_nodes`] order.
    pub fn marked_values(&self, x: &[Vec2<T>]) -> Result<Vec<(T, Vec2<T>)>> {
        let pts: Vec<Vec2<T>> = self.marked_nodes.iter().map(|&s| x[s]).collect();
        self.field.interpolate(&pts).into_iter().collect()
    }

    /// `max_{s∈S} |σ(x_s)|`; zero for an empty S.
    pub fn sigma_max(&self, x: &[Vec2<T>]) -> Result<T> {
        Ok(self
            .marked_values(x)?
            .iter()
            .fold(T::zero(), |m, &(s, _)| m.max(s.abs())))
    }

    /// `(F_μ, Σ_s σ²)`.
    pub fn objective_parts(&self, x: &[Vec2<T>]) -> Result<(T, T)> {
        let fmu = self.all_terms(x, 0).iter().map(|t| t.value).sum();
        let fs = self.marked_values(x)?.iter().map(|&(s, _)| s * s).sum();
        Ok((fmu, fs))
    }

    pub fn objective(&self, x: &[Vec2<T>]) -> Result<T> {
        let (fmu, fs) = self.objective_parts(x)?;
        Ok(fmu + self.fit_weight * fs)
    }

    /// `F_μ` alone.
    pub fn shape_objective(&self, x: &[Vec2<T>]) -> T {
        self.all_terms(x, 0).iter().map(|t| t.value).sum()
    }

    /// Per element, the largest μ over its quadrature points.
    pub fn element_max_metric(&self, x: &[Vec2<T>]) -> Vec<T> {
        (0..self.mesh.elements.len())
            .map(|e| {
                let nodes = self.element_nodes(e, x);
                let w = self.targets[e].inverse().expect("det W > 0");
                self.mesh.elements[e]
                    .reference()
                    .quad_grads
                    .iter()
                    .map(|g| self.metric.value(&jacobian(&nodes, g).matmul(&w)))
                    .fold(T::neg_infinity(), T::max)
            })
            .collect()
    }

    /// `∂F/∂x` for every true node, ignoring the boundary policy.
    pub fn gradient(&self, x: &[Vec2<T>]) -> Result<Vec<Vec2<T>>> {
        let mut g = vec![Vec2::zero(); x.len()];
        for (e, t) in self.all_terms(x, 1).into_iter().enumerate() {
            for (i, gi) in t.grad.iter().enumerate() {
                for &(k, w) in &self.dofs.local[e][i] {
                    g[k] = g[k] + *gi * w;
                }
            }
        }
        let two_w = T::c(2.0) * self.fit_weight;
        for (&s, (sig, grad)) in self.marked_nodes.iter().zip(self.marked_values(x)?) {
            g[s] = g[s] + grad * (two_w * sig);
        }
        Ok(g)
    }

    /// Gradient in reduced coordinates, `Bᵀ ∂F/∂x`.
    pub fn reduce(&self, g: &[Vec2<T>]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_reduced];
        for (gi, r) in g.iter().zip(&self.reduced) {
            for &(k, c) in r {
                out[k] += c.dot(*gi);
            }
        }
        out
    }

    /// Reduced Hessian: exact second derivative of `F_μ` plus the
    /// Gauss–Newton term `2 w_σ ∇σ ∇σᵀ` of the fitting penalty.
    pub fn hessian(&self, x: &[Vec2<T>]) -> Result<CsrMatrix<T>> {
        let terms = self.all_terms(x, 2);
        let mut trip = Vec::new();
        for (e, t) in terms.iter().enumerate() {
            let lr = &self.local_reduced[e];
            let n = lr.len();
            let dim = 2 * n;
            for (i, li) in lr.iter().enumerate() {
                for (j, lj) in lr.iter().enumerate() {
                    let k = Mat2::new(
                        t.hess[(2 * i) * dim + 2 * j],
                        t.hess[(2 * i) * dim + 2 * j + 1],
                        t.hess[(2 * i + 1) * dim + 2 * j],
                        t.hess[(2 * i + 1) * dim + 2 * j + 1],
                    );
                    for &(r, cr) in li {
                        for &(s, cs) in lj {
                            trip.push((r, s, cr.dot(k.mul_vec(cs))));
                        }
                    }
                }
            }
        }
        let two_w = T::c(2.0) * self.fit_weight;
        for (&s, (_, grad)) in self.marked_nodes.iter().zip(self.marked_values(x)?) {
            for &(r, cr) in &self.reduced[s] {
                for &(q, cq) in &self.reduced[s] {
                    trip.push((r, q, two_w * cr.dot(grad) * cq.dot(grad)));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.num_reduced, trip))
    }
}

fn jacobian<T: Real>(nodes: &[Vec2<T>], grads: &[Vec2<T>]) -> Mat2<T> {
    let mut a = Mat2::zero();
    for (x, g) in nodes.iter().zip(grads) {
        a.m[0][0] += x.x * g.x;
        a.m[0][1] += x.x * g.y;
        a.m[1][0] += x.y * g.x;
        a.m[1][1] += x.y * g.y;
    }
    a
}

/// Interior nodes are free; nodes on a boundary edge slide along it;
/// vertices where the boundary turns are fixed.
fn boundary_freedom<T: Real>(mesh: &MixedOrderMesh<T>, dofs: &DofMap<T>) -> Vec<NodeFreedom<T>> {
    let mut freedom = vec![NodeFreedom::Free; dofs.num_global];
    let mut vertex_dirs: Vec<Vec<Vec2<T>>> = vec![Vec::new(); mesh.vertices.len()];
    for (id, edge) in mesh.edges().iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let [a, b] = edge.vertices;
        let d = mesh.vertices[b] - mesh.vertices[a];
        let d = d * (T::one() / d.norm());
        let list = &dofs.edge_nodes[id];
        for &g in &list[1..list.len() - 1] {
            freedom[g] = NodeFreedom::Slide(d);
        }
        vertex_dirs[a].push(d);
        vertex_dirs[b].push(d);
    }
    let tol = T::tol(1e-10);
    for (v, dirs) in vertex_dirs.iter().enumerate() {
        freedom[v] = match dirs.as_slice() {
            [] => NodeFreedom::Free,
            [d0, d1] if d0.cross(*d1).abs() <= tol => NodeFreedom::Slide(*d0),
            _ => NodeFreedom::Fixed,
        };
    }
    freedom
}
