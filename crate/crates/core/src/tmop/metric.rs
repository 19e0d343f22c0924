use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::scalar::Real;

/// 2D quality metric μ(T) evaluated on `T = A·W⁻¹`.
///
/// Matrices are handled in row-major flat form `t = (T00, T01, T10, T11)`;
/// derivatives are returned in the same layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QualityMetric<T> {
    /// `|T|²/(2τ) − 1`, shape.
    Shape2,
    /// `½(τ − 1/τ)²`, size.
    Size77,
    /// `γ μ₂ + (1−γ) μ₇₇`.
    ShapeSize80 { gamma: T },
}

impl<T: Real> QualityMetric<T> {
    /// From the numeric id `2`, `77` or `80`.
    pub fn from_id(id: u32, gamma: T) -> Result<Self> {
        match id {
            2 => Ok(Self::Shape2),
            77 => Ok(Self::Size77),
            80 => {
                if !(gamma >= T::zero() && gamma <= T::one()) {
                    return Err(Error::InvalidArgument("metric gamma must lie in [0, 1]".into()));
                }
                Ok(Self::ShapeSize80 { gamma })
            }
            _ => Err(Error::InvalidArgument(format!("unknown metric {id}; expected 2, 77 or 80"))),
        }
    }

    pub fn id(&self) -> u32 {
        match self {
            Self::Shape2 => 2,
            Self::Size77 => 77,
            Self::ShapeSize80 { .. } => 80,
        }
    }

    /// μ(T); `+∞` when `det T ≤ 0`.
    pub fn value(&self, m: &Mat2<T>) -> T {
        let tau = m.det();
        if !(tau > T::zero()) {
            return T::infinity();
        }
        match *self {
            Self::Shape2 => mu2(m.frob2(), tau),
            Self::Size77 => mu77(tau),
            Self::ShapeSize80 { gamma } => gamma * mu2(m.frob2(), tau) + (T::one() - gamma) * mu77(tau),
        }
    }

    /// μ and `∂μ/∂T`.
    pub fn first(&self, m: &Mat2<T>) -> (T, [T; 4]) {
        let (v, g, _) = self.eval(m, false);
        (v, g)
    }

    /// μ, `∂μ/∂T` and `∂²μ/∂T²`.
    pub fn second(&self, m: &Mat2<T>) -> (T, [T; 4], [[T; 4]; 4]) {
        self.eval(m, true)
    }

    fn eval(&self, m: &Mat2<T>, hess: bool) -> (T, [T; 4], [[T; 4]; 4]) {
        let z = [[T::zero(); 4]; 4];
        let tau = m.det();
        if !(tau > T::zero()) {
            return (T::infinity(), [T::zero(); 4], z);
        }
        let t = m.flat();
        let g = [t[3], -t[2], -t[1], t[0]];
        let (w2, w77) = match *self {
            Self::Shape2 => (T::one(), T::zero()),
            Self::Size77 => (T::zero(), T::one()),
            Self::ShapeSize80 { gamma } => (gamma, T::one() - gamma),
        };
        let mut val = T::zero();
        let mut grad = [T::zero(); 4];
        let mut h = z;
        let two = T::c(2.0);
        if w2 != T::zero() {
            let f = m.frob2();
            val += w2 * mu2(f, tau);
            let t2 = tau * tau;
            for i in 0..4 {
                grad[i] += w2 * (t[i] / tau - f * g[i] / (two * t2));
            }
            if hess {
                let t3 = t2 * tau;
                for i in 0..4 {
                    for j in 0..4 {
                        let mut v = -(t[i] * g[j] + g[i] * t[j]) / t2 + f * g[i] * g[j] / t3;
                        if i == j {
                            v += T::one() / tau;
                        }
                        v -= f * hess_tau(i, j) / (two * t2);
                        h[i][j] += w2 * v;
                    }
                }
            }
        }
        if w77 != T::zero() {
            val += w77 * mu77(tau);
            let inv = T::one() / tau;
            let d1 = (tau - inv) * (T::one() + inv * inv);
            for i in 0..4 {
                grad[i] += w77 * d1 * g[i];
            }
            if hess {
                let s = T::one() + inv * inv;
                let d2 = s * s - two * (tau - inv) * inv * inv * inv;
                for i in 0..4 {
                    for j in 0..4 {
                        h[i][j] += w77 * (d2 * g[i] * g[j] + d1 * hess_tau(i, j));
                    }
                }
            }
        }
        (val, grad, h)
    }
}

fn mu2<T: Real>(f: T, tau: T) -> T {
    f / (T::c(2.0) * tau) - T::one()
}

fn mu77<T: Real>(tau: T) -> T {
    let d = tau - T::one() / tau;
    T::c(0.5) * d * d
}

/// Second derivative of `det T` in flat layout.
fn hess_tau<T: Real>(i: usize, j: usize) -> T {
    match (i, j) {
        (0, 3) | (3, 0) => T::one(),
        (1, 2) | (2, 1) => -T::one(),
        _ => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    const ALL: [QualityMetric<f64>; 4] = [
        QualityMetric::Shape2,
        QualityMetric::Size77,
        QualityMetric::ShapeSize80 { gamma: 0.5 },
        QualityMetric::ShapeSize80 { gamma: 0.9 },
    ];

    #[test]
    fn hand_values() {
        let d21 = Mat2::<f64>::diag(2.0, 1.0);
        assert_eq!(QualityMetric::Shape2.value(&Mat2::<f64>::identity()), 0.0);
        assert_eq!(QualityMetric::Shape2.value(&Mat2::diag(2.0, 2.0)), 0.0);
        assert!((QualityMetric::Shape2.value(&d21) - 0.25).abs() < 1e-15);
        assert!((QualityMetric::Size77.value(&d21) - 1.125).abs() < 1e-15);
        assert!((QualityMetric::ShapeSize80 { gamma: 0.5 }.value(&d21) - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn barrier_for_nonpositive_det() {
        for m in ALL {
            assert_eq!(m.value(&Mat2::diag(1.0, -1.0)), f64::INFINITY);
            assert_eq!(m.value(&Mat2::zero()), f64::INFINITY);
            assert_eq!(m.second(&Mat2::diag(-1.0, 1.0)).0, f64::INFINITY);
        }
    }

    #[test]
    fn shape_metric_vanishes_on_scaled_rotations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let c: f64 = rng.gen_range(0.1..10.0);
            let r = Mat2::new(th.cos(), -th.sin(), th.sin(), th.cos()).scale(c);
            assert!(QualityMetric::Shape2.value(&r).abs() < 1e-14);
        }
    }

    #[test]
    fn size_metric_zero_iff_unit_det() {
        assert_eq!(QualityMetric::Size77.value(&Mat2::new(3.0, 1.0, 2.0, 1.0)), 0.0);
        assert!(QualityMetric::Size77.value(&Mat2::diag(1.0 + 1e-6, 1.0)) > 0.0);
    }

    #[test]
    fn blend_endpoints_are_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = Mat2::new(
                rng.gen_range(0.5..2.0),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(0.5..2.0),
            );
            assert_eq!(
                QualityMetric::ShapeSize80 { gamma: 1.0 }.value(&m),
                QualityMetric::Shape2.value(&m)
            );
            assert_eq!(
                QualityMetric::ShapeSize80 { gamma: 0.0 }.value(&m),
                QualityMetric::Size77.value(&m)
            );
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..30 {
            let m = Mat2::new(
                rng.gen_range(0.5..2.0),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(0.5..2.0),
            );
            for metric in ALL {
                let (_, g, hs) = metric.second(&m);
                let t = m.flat();
                for k in 0..4 {
                    let mut tp = t;
                    let mut tm = t;
                    tp[k] += h;
                    tm[k] -= h;
                    let (mp, mm) = (Mat2::from_flat(tp), Mat2::from_flat(tm));
                    let fd = (metric.value(&mp) - metric.value(&mm)) / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-7 * (1.0 + fd.abs()), "grad {k}: {fd} vs {}", g[k]);
                    let (gp, gm) = (metric.first(&mp).1, metric.first(&mm).1);
                    for j in 0..4 {
                        let fd2 = (gp[j] - gm[j]) / (2.0 * h);
                        assert!((fd2 - hs[j][k]).abs() <= 1e-6 * (1.0 + fd2.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn metric_ids() {
        assert_eq!(QualityMetric::<f64>::from_id(80, 0.3).unwrap().id(), 80);
        assert!(QualityMetric::<f64>::from_id(80, 1.5).is_err());
        assert!(QualityMetric::<f64>::from_id(7, 0.5).is_err());
    }
}
