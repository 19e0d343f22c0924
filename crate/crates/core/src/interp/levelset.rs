use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{DofMap, MixedOrderMesh};
use crate::interp::locator::{ComputationalCoords, Locator};
use crate::linalg::Vec2;
use crate::scalar::Real;

type ScalarFn<T> = Arc<dyn Fn(Vec2<T>) -> T + Send + Sync>;
type VectorFn<T> = Arc<dyn Fn(Vec2<T>) -> Vec2<T> + Send + Sync>;

/// Closed-form level set with its gradient.
#[derive(Clone)]
pub struct AnalyticLevelSet<T> {
    pub name: String,
    value: ScalarFn<T>,
    gradient: VectorFn<T>,
}

impl<T> fmt::Debug for AnalyticLevelSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticLevelSet").field("name", &self.name).finish()
    }
}

impl<T: Real> AnalyticLevelSet<T> {
    pub fn new<F, G>(name: impl Into<String>, value: F, gradient: G) -> Self
    where
        F: Fn(Vec2<T>) -> T + Send + Sync + 'static,
        G: Fn(Vec2<T>) -> Vec2<T> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    /// `(x−0.5)⁴ + (y−0.5)⁴ − 0.24⁴`.
    pub fn squircle() -> Self {
        let h = T::c(0.5);
        let r4 = T::c(0.24).powi(4);
        Self::new(
            "squircle2d",
            move |x: Vec2<T>| (x.x - h).powi(4) + (x.y - h).powi(4) - r4,
            move |x: Vec2<T>| Vec2::new(T::c(4.0) * (x.x - h).powi(3), T::c(4.0) * (x.y - h).powi(3)),
        )
    }

    /// `|x − c|² − r²`.
    pub fn circle(center: Vec2<T>, radius: T) -> Self {
        Self::new(
            "circle",
            move |x: Vec2<T>| (x - center).dot(x - center) - radius * radius,
            move |x: Vec2<T>| (x - center) * T::c(2.0),
        )
    }

    /// `n · x − c`.
    pub fn plane(normal: Vec2<T>, offset: T) -> Self {
        Self::new("plane", move |x: Vec2<T>| normal.dot(x) - offset, move |_| normal)
    }

    /// Built-in by name: `squircle2d`, `circle[:cx,cy,r]` (default `0.5,0.5,0.3`),
    /// `plane[:nx,ny,c]` (default `0,1,0.5`, i.e. `y − 0.5`).
    pub fn named(spec: &str) -> Result<Self> {
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let nums = |a: Option<&str>, default: [f64; 3]| -> Result<[T; 3]> {
            let v = match a {
                None => default,
                Some(s) => {
                    let parts: Vec<f64> = s
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::InvalidArgument(format!("level-set parameters '{s}': {e}")))?;
                    if parts.len() != 3 {
                        return Err(Error::InvalidArgument(format!("level set '{name}' takes 3 parameters")));
                    }
                    [parts[0], parts[1], parts[2]]
                }
            };
            Ok([T::c(v[0]), T::c(v[1]), T::c(v[2])])
        };
        match name {
            "squircle2d" | "squircle" => Ok(Self::squircle()),
            "circle" => {
                let [cx, cy, r] = nums(args, [0.5, 0.5, 0.3])?;
                Ok(Self::circle(Vec2::new(cx, cy), r))
            }
            "plane" => {
                let [nx, ny, c] = nums(args, [0.0, 1.0, 0.5])?;
                Ok(Self::plane(Vec2::new(nx, ny), c))
            }
            _ => Err(Error::InvalidArgument(format!("unknown level set '{name}'"))),
        }
    }
}

/// Level set carried as nodal values on a background mesh, with a nodal
/// gradient field obtained by averaging element-wise derivatives.
#[derive(Clone, Debug)]
pub struct DiscreteLevelSet<T: Real> {
    locator: Locator<T>,
    values: Vec<Vec<T>>,
    gradients: Vec<Vec<Vec2<T>>>,
}

impl<T: Real> DiscreteLevelSet<T> {
    /// `values[e][i]` is σ at node `i` of background element `e`.
    pub fn from_nodal(mesh: &MixedOrderMesh<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if values.len() != mesh.elements.len() {
            return Err(Error::InvalidArgument("one value block per background element required".into()));
        }
        for (e, (v, el)) in values.iter().zip(&mesh.elements).enumerate() {
            if v.len() != el.nodes.len() {
                return Err(Error::InvalidArgument(format!("element {e}: expected {} values", el.nodes.len())));
            }
        }
        mesh.check_valid()?;
        let gradients = nodal_gradient(mesh, &values)?;
        Ok(Self {
            locator: Locator::new(mesh)?,
            values,
            gradients,
        })
    }

    /// Samples `f` at every background node.
    pub fn sample<F: Fn(Vec2<T>) -> T>(mesh: &MixedOrderMesh<T>, f: F) -> Result<Self> {
        let values = mesh.elements.iter().map(|el| el.nodes.iter().map(|&x| f(x)).collect()).collect();
        Self::from_nodal(mesh, values)
    }

    pub fn mesh(&self) -> &MixedOrderMesh<T> {
        self.locator.mesh()
    }

    pub fn locator(&self) -> &Locator<T> {
        &self.locator
    }

    pub fn nodal_values(&self) -> &[Vec<T>] {
        &self.values
    }

    /// Σ_i u_i w̄_i(x̄*) in the located element.
    pub fn eval_at(&self, c: &ComputationalCoords<T>) -> (T, Vec2<T>) {
        let el = &self.mesh().elements[c.element];
        let w = el.reference().eval_basis(c.reference);
        let v = self.values[c.element].iter().zip(&w).map(|(&u, &wi)| u * wi).sum();
        let g = self.gradients[c.element]
            .iter()
            .zip(&w)
            .fold(Vec2::zero(), |acc, (&gi, &wi)| acc + gi * wi);
        (v, g)
    }
}

/// Element-wise physical gradients at the nodes, averaged over elements that
/// share a true node, then redistributed through the constraint map.
fn nodal_gradient<T: Real>(mesh: &MixedOrderMesh<T>, values: &[Vec<T>]) -> Result<Vec<Vec<Vec2<T>>>> {
    let map = DofMap::new(mesh)?;
    let mut sum = vec![Vec2::zero(); map.num_global];
    let mut count = vec![0usize; map.num_global];
    for (e, el) in mesh.elements.iter().enumerate() {
        let re = el.reference();
        for (i, &xr) in re.nodes.iter().enumerate() {
            let terms = &map.local[e][i];
            if !(terms.len() == 1 && terms[0].1 == T::one()) {
                continue;
            }
            let grads = re.eval_grads(xr);
            let gref = grads.iter().zip(&values[e]).fold(Vec2::zero(), |acc, (&g, &u)| acc + g * u);
            let a = el.eval_jacobian(xr);
            let inv_t = a.inverse().ok_or(Error::InvalidMesh {
                element: e,
                min_det: a.det().to_f64_lossy(),
            })?;
            let gphys = inv_t.transpose().mul_vec(gref);
            sum[terms[0].0] = sum[terms[0].0] + gphys;
            count[terms[0].0] += 1;
        }
    }
    let avg: Vec<Vec2<T>> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| if c > 0 { s * (T::one() / T::from_usize_lossy(c)) } else { s })
        .collect();
    Ok((0..mesh.elements.len()).map(|e| map.element_nodes(e, &avg)).collect())
}

/// Level-set function σ queried at arbitrary points: analytic closure or
/// discrete field on a background mesh. Both answer the same queries.
#[derive(Clone, Debug)]
pub enum LevelSetField<T: Real> {
    Analytic(AnalyticLevelSet<T>),
    Discrete(Box<DiscreteLevelSet<T>>),
}

impl<T: Real> From<AnalyticLevelSet<T>> for LevelSetField<T> {
    fn from(a: AnalyticLevelSet<T>) -> Self {
        LevelSetField::Analytic(a)
    }
}

impl<T: Real> From<DiscreteLevelSet<T>> for LevelSetField<T> {
    fn from(d: DiscreteLevelSet<T>) -> Self {
        LevelSetField::Discrete(Box::new(d))
    }
}

impl<T: Real> LevelSetField<T> {
    pub fn named(spec: &str) -> Result<Self> {
        AnalyticLevelSet::named(spec).map(Into::into)
    }

    pub fn label(&self) -> String {
        match self {
            LevelSetField::Analytic(a) => a.name.clone(),
            LevelSetField::Discrete(_) => "discrete".into(),
        }
    }

    /// σ(x) and ∇σ(x).
    pub fn query(&self, x: Vec2<T>) -> Result<(T, Vec2<T>)> {
        match self {
            LevelSetField::Analytic(a) => Ok(((a.value)(x), (a.gradient)(x))),
            LevelSetField::Discrete(d) => {
                let c = d.locator.locate(x);
                if !c.found() {
                    return Err(Error::NotFound {
                        x: x.x.to_f64_lossy(),
                        y: x.y.to_f64_lossy(),
                    });
                }
                Ok(d.eval_at(&c))
            }
        }
    }

    pub fn value(&self, x: Vec2<T>) -> Result<T> {
        match self {
            LevelSetField::Analytic(a) => Ok((a.value)(x)),
            _ => self.query(x).map(|q| q.0),
        }
    }

    pub fn gradient(&self, x: Vec2<T>) -> Result<Vec2<T>> {
        self.query(x).map(|q| q.1)
    }

    /// Batch query; results come back in input order regardless of parallelism.
    pub fn interpolate(&self, points: &[Vec2<T>]) -> Vec<Result<(T, Vec2<T>)>> {
        points.par_iter().map(|&x| self.query(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Geometry;
    use rand::{Rng, SeedableRng};

    fn cartesian(n: usize, p: usize) -> MixedOrderMesh<f64> {
        let mut v = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                v.push(Vec2::new(i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let mut cells = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let a = j * (n + 1) + i;
                cells.push((Geometry::Quadrilateral, vec![a, a + 1, a + n + 2, a + n + 1], 0));
            }
        }
        MixedOrderMesh::from_linear(v, &cells, p).unwrap()
    }

    #[test]
    fn squircle_formula() {
        let s = AnalyticLevelSet::<f64>::squircle();
        let v = (s.value)(Vec2::new(0.5, 0.5));
        assert!((v + 0.24f64.powi(4)).abs() < 1e-18);
        assert!(((s.value)(Vec2::new(0.74, 0.5))).abs() < 1e-16);
    }

    #[test]
    fn named_registry() {
        assert!(LevelSetField::<f64>::named("squircle2d").is_ok());
        let p = LevelSetField::<f64>::named("plane").unwrap();
        assert!((p.value(Vec2::new(0.3, 0.7)).unwrap() - 0.2).abs() < 1e-15);
        let c = LevelSetField::<f64>::named("circle:0,0,1").unwrap();
        assert!(c.value(Vec2::new(1.0, 0.0)).unwrap().abs() < 1e-15);
        assert!(LevelSetField::<f64>::named("torus").is_err());
        assert!(LevelSetField::<f64>::named("circle:1,2").is_err());
    }

    #[test]
    fn constant_and_linear_fields_reproduced() {
        let bg = cartesian(3, 2);
        let c = LevelSetField::from(DiscreteLevelSet::sample(&bg, |_| 3.0).unwrap());
        let l = LevelSetField::from(DiscreteLevelSet::sample(&bg, |x| x.x + x.y).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
            assert!((c.value(x).unwrap() - 3.0).abs() < 1e-12);
            let (v, g) = l.query(x).unwrap();
            assert!((v - x.x - x.y).abs() < 1e-10);
            assert!((g - Vec2::new(1.0, 1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn nodal_queries_return_stored_values() {
        let bg = cartesian(2, 3);
        let d = DiscreteLevelSet::sample(&bg, |x| (3.0 * x.x).sin() * x.y).unwrap();
        let f = LevelSetField::from(d.clone());
        for (e, el) in bg.elements.iter().enumerate() {
            for (i, &x) in el.nodes.iter().enumerate() {
                assert!((f.value(x).unwrap() - d.nodal_values()[e][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn outside_query_is_not_found() {
        let bg = cartesian(2, 1);
        let f = LevelSetField::from(DiscreteLevelSet::sample(&bg, |x| x.x).unwrap());
        assert!(matches!(f.value(Vec2::new(3.0, 0.5)), Err(Error::NotFound { .. })));
    }

    #[test]
    fn squircle_on_background_matches_closure() {
        // p_σB = 4 on 32×32: quartic σ is reproduced exactly by Q4
        let bg = cartesian(32, 4);
        let s = AnalyticLevelSet::<f64>::squircle();
        let sv = s.clone();
        let f = LevelSetField::from(DiscreteLevelSet::sample(&bg, move |x| (sv.value)(x)).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
            assert!((f.value(x).unwrap() - (s.value)(x)).abs() <= 1e-6);
        }
    }

    #[test]
    fn batch_order_is_preserved() {
        let bg = cartesian(4, 2);
        let f = LevelSetField::from(DiscreteLevelSet::sample(&bg, |x| x.x * 2.0 - x.y).unwrap());
        let pts: Vec<Vec2<f64>> = (0..40).map(|k| Vec2::new(k as f64 / 40.0, 0.37)).collect();
        let a = f.interpolate(&pts);
        let b = f.interpolate(&pts);
        for (k, (r1, r2)) in a.iter().zip(&b).enumerate() {
            let (v1, v2) = (r1.as_ref().unwrap().0, r2.as_ref().unwrap().0);
            assert_eq!(v1.to_bits(), v2.to_bits());
            assert!((v1 - (pts[k].x * 2.0 - 0.37)).abs() < 1e-12);
        }
    }
}
