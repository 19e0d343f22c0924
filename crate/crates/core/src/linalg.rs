//! Small fixed-size vectors and matrices, a dense solver for basis tables,
//! and the sparse matrix + preconditioned CG used by the Newton driver.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    #[inline]
    pub fn get(self, a: usize) -> T {
        if a == 0 {
            self.x
        } else {
            self.y
        }
    }

    #[inline]
    pub fn set(&mut self, a: usize, v: T) {
        if a == 0 {
            self.x = v
        } else {
            self.y = v
        }
    }

    pub fn to_f64(self) -> Vec2<f64> {
        Vec2::new(self.x.to_f64_lossy(), self.y.to_f64_lossy())
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Row-major 2×2 matrix, `m[r][c]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> Mat2<T> {
    #[inline]
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn diag(a: T, d: T) -> Self {
        Self::new(a, T::zero(), T::zero(), d)
    }

    pub fn from_cols(c0: Vec2<T>, c1: Vec2<T>) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    #[inline]
    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Squared Frobenius norm.
    #[inline]
    pub fn frob2(&self) -> T {
        self.m[0][0] * self.m[0][0]
            + self.m[0][1] * self.m[0][1]
            + self.m[1][0] * self.m[1][0]
            + self.m[1][1] * self.m[1][1]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    /// Inverse; `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        Some(Self::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        ))
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..2 {
            for j in 0..2 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        r
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    /// Entries flattened row-major: `(T00, T01, T10, T11)`.
    pub fn flat(&self) -> [T; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn from_flat(f: [T; 4]) -> Self {
        Self::new(f[0], f[1], f[2], f[3])
    }

    pub fn max_abs_diff(&self, o: &Self) -> T {
        let a = self.flat();
        let b = o.flat();
        (0..4).fold(T::zero(), |acc, i| acc.max((a[i] - b[i]).abs()))
    }
}

impl<T> Index<(usize, usize)> for Mat2<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.m[r][c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat2<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.m[r][c]
    }
}

/// Solves `a · x = b` for several right-hand sides by Gaussian elimination
/// with partial pivoting. `a` is `n×n` row-major, `b` is `n×k` row-major.
/// Returns `None` for a numerically singular system.
pub fn solve_dense<T: Real>(mut a: Vec<T>, mut b: Vec<T>, n: usize, k: usize) -> Option<Vec<T>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv * n + col].abs() <= T::epsilon() * T::c(1e-3) {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            for c in 0..k {
                b.swap(piv * k + c, col * k + c);
            }
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] -= f * v;
            }
            for c in 0..k {
                let v = b[col * k + c];
                b[r * k + c] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[col * n + col];
        for c in 0..k {
            let mut s = b[col * k + c];
            for j in col + 1..n {
                s -= a[col * n + j] * b[j * k + c];
            }
            b[col * k + c] = s / d;
        }
    }
    Some(b)
}

/// Compressed sparse row matrix assembled from unsorted triplets.
#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len() / 2);
        let mut vals: Vec<T> = Vec::with_capacity(trip.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for r in 0..self.n {
            let mut s = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match span.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => T::zero(),
        }
    }
}

/// Block-diagonal preconditioner with blocks of size 1 or 2.
#[derive(Clone, Debug)]
pub struct BlockJacobi<T> {
    blocks: Vec<(Vec<usize>, Vec<T>)>,
}

impl<T: Real> BlockJacobi<T> {
    /// `groups` partitions the unknowns; each group has 1 or 2 members.
    /// Blocks that are not positive definite fall back to `|diag|`.
    pub fn new(a: &CsrMatrix<T>, groups: &[Vec<usize>]) -> Self {
        let tiny = T::min_positive_value().sqrt();
        let blocks = groups
            .iter()
            .map(|g| match g.len() {
                1 => {
                    let d = a.get(g[0], g[0]).abs().max(tiny);
                    (g.clone(), vec![T::one() / d])
                }
                _ => {
                    let (i, j) = (g[0], g[1]);
                    let (b00, b01, b10, b11) = (a.get(i, i), a.get(i, j), a.get(j, i), a.get(j, j));
                    let m = Mat2::new(b00, b01, b10, b11);
                    let spd = b00 > T::zero() && m.det() > tiny * (b00 * b11).abs();
                    let inv = if spd {
                        m.inverse()
                    } else {
                        None
                    };
                    let inv = inv.unwrap_or_else(|| {
                        Mat2::diag(T::one() / b00.abs().max(tiny), T::one() / b11.abs().max(tiny))
                    });
                    (g.clone(), inv.flat().to_vec())
                }
            })
            .collect();
        Self { blocks }
    }

    pub fn apply(&self, r: &[T], z: &mut [T]) {
        for (g, inv) in &self.blocks {
            if g.len() == 1 {
                z[g[0]] = inv[0] * r[g[0]];
            } else {
                let (a, b) = (r[g[0]], r[g[1]]);
                z[g[0]] = inv[0] * a + inv[1] * b;
                z[g[1]] = inv[2] * a + inv[3] * b;
            }
        }
    }
}

/// Result of a truncated PCG solve.
#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub negative_curvature: bool,
    pub converged: bool,
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Truncated preconditioned conjugate gradients for `A x = b` starting at 0.
///
/// Stops at relative residual `rtol`, at `max_iter`, or on the first
/// direction of non-positive curvature (the current iterate is returned).
pub fn truncated_pcg<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    pre: &BlockJacobi<T>,
    rtol: T,
    max_iter: usize,
) -> CgOutcome<T> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return CgOutcome {
            x,
            iterations: 0,
            negative_curvature: false,
            converged: true,
        };
    }
    for it in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() || !pap.is_finite() {
            return CgOutcome {
                x,
                iterations: it,
                negative_curvature: true,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= rtol * bnorm {
            return CgOutcome {
                x,
                iterations: it + 1,
                negative_curvature: false,
                converged: true,
            };
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        x,
        iterations: max_iter,
        negative_curvature: false,
        converged: false,
    }
}
