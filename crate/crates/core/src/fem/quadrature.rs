//! Gauss–Legendre and Gauss–Lobatto point sets and the quadrature rules built
//! from them. All rules live on the unit reference domains.

use crate::error::{Error, Result};
use crate::fem::Geometry;
use crate::linalg::Vec2;
use crate::scalar::Real;

/// Legendre polynomial `P_n(x)` and its derivative on `[-1, 1]`.
pub(crate) fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((T::c(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P_n' = n (x P_n - P_{n-1}) / (x² - 1), valid away from ±1
    let nf = T::from_usize_lossy(n);
    let dp = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// Gauss–Legendre points and weights on `[0, 1]`, ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one point".into()));
    }
    let mut pts = vec![T::zero(); n];
    let mut wts = vec![T::zero(); n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = T::c(guess);
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::c(4.0) {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = T::c(2.0) / ((T::one() - x * x) * dp * dp);
        // map [-1,1] -> [0,1]; root i is the i-th from the right
        let hi = (T::one() + x) / T::c(2.0);
        let lo = (T::one() - x) / T::c(2.0);
        pts[n - 1 - i] = hi;
        pts[i] = lo;
        wts[n - 1 - i] = w / T::c(2.0);
        wts[i] = w / T::c(2.0);
    }
    if n % 2 == 1 {
        pts[n / 2] = T::c(0.5);
    }
    Ok((pts, wts))
}

/// Gauss–Lobatto nodes of order `p` on `[0, 1]`: the endpoints plus the roots
/// of `P_p'`, sorted and exactly mirror-symmetric about `0.5`.
pub fn gauss_lobatto_nodes<T: Real>(p: usize) -> Result<Vec<T>> {
    if p == 0 {
        return Err(Error::InvalidOrder(0));
    }
    let mut g = vec![T::zero(); p + 1];
    g[p] = T::one();
    for k in 1..=(p - 1) / 2 + usize::from(p % 2 == 0 && p > 1) {
        if 2 * k == p {
            g[k] = T::c(0.5);
            continue;
        }
        // Newton on P_p'(x) = 0 with (1-x²) P_p'' = 2x P_p' - p(p+1) P_p
        let mut x = T::c(-(std::f64::consts::PI * k as f64 / p as f64).cos());
        let pp1 = T::from_usize_lossy(p * (p + 1));
        for _ in 0..100 {
            let (pv, dp) = legendre(p, x);
            let d2 = (T::c(2.0) * x * dp - pp1 * pv) / (T::one() - x * x);
            let dx = dp / d2;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::c(4.0) {
                break;
            }
        }
        let v = (x + T::one()) / T::c(2.0);
        g[k] = v;
        g[p - k] = T::one() - v;
    }
    Ok(g)
}

/// Points and weights on a reference domain.
#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    pub points: Vec<Vec2<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor Gauss–Legendre rule for edges (`y = 0`) and quads; collapsed
/// (Duffy) tensor rule for triangles. `n` is points per direction.
pub fn quadrature_rule<T: Real>(geometry: Geometry, n: usize) -> Result<QuadratureRule<T>> {
    let (x, w) = gauss_legendre::<T>(n)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match geometry {
        Geometry::Segment => {
            for i in 0..n {
                points.push(Vec2::new(x[i], T::zero()));
                weights.push(w[i]);
            }
        }
        Geometry::Quadrilateral => {
            for j in 0..n {
                for i in 0..n {
                    points.push(Vec2::new(x[i], x[j]));
                    weights.push(w[i] * w[j]);
                }
            }
        }
        Geometry::Triangle => {
            for j in 0..n {
                let v = x[j];
                for i in 0..n {
                    let u = x[i];
                    points.push(Vec2::new(u * (T::one() - v), v));
                    weights.push(w[i] * w[j] * (T::one() - v));
                }
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Points per direction used for every integral at local order `p`.
pub fn points_for_order(p: usize) -> usize {
    2 * p + 3
}
