//! Dense kernels for small, fixed-size vectors and matrices.
//!
//! Everything downstream (sensitivity integration, the customized solver,
//! the power iteration) is written against these routines. Storage is
//! row-major. Buffers are sized once when a workspace is built; the slice
//! kernels at the bottom of this module never allocate, so they can run in
//! a solver's inner loop.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Dense column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVec<T> {
    data: Vec<T>,
}

/// The three norms used across the solver stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms<T> {
    pub two: T,
    pub inf: T,
    pub one: T,
}

impl<T: Real> DenseMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::dims("DenseMat::from_vec", (rows, cols), (data.len(), 1)));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::dims("DenseMat::from_rows", (nrows, ncols), (1, r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(nrows, ncols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Returns `A x`, or `Aᵀ x` when `transpose` is set.
    pub fn mat_vec(&self, x: &DenseVec<T>, transpose: bool) -> Result<DenseVec<T>> {
        let (inner, outer) = if transpose {
            (self.rows, self.cols)
        } else {
            (self.cols, self.rows)
        };
        if inner != x.len() {
            return Err(Error::dims("mat_vec", self.shape(), (x.len(), 1)));
        }
        let mut out = vec![T::zero(); outer];
        if transpose {
            gemv_t(self.as_slice(), self.rows, self.cols, x.as_slice(), &mut out);
        } else {
            gemv(self.as_slice(), self.rows, self.cols, x.as_slice(), &mut out);
        }
        Ok(DenseVec::from(out))
    }

    pub fn mat_mat(&self, b: &DenseMat<T>) -> Result<DenseMat<T>> {
        if self.cols != b.rows {
            return Err(Error::dims("mat_mat", self.shape(), b.shape()));
        }
        let mut c = DenseMat::zeros(self.rows, b.cols);
        gemm(
            self.as_slice(),
            b.as_slice(),
            c.as_mut_slice(),
            self.rows,
            self.cols,
            b.cols,
        );
        Ok(c)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|r| self.row(r).iter().fold(T::zero(), |a, &v| a + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        norm_inf(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<(usize, usize)> for DenseMat<T> {
    type Output = T;

    #[inline(always)]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMat<T> {
    #[inline(always)]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> DenseVec<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![T::zero(); len],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn norms(&self) -> Norms<T> {
        norms(&self.data)
    }
}

impl<T> From<Vec<T>> for DenseVec<T> {
    fn from(data: Vec<T>) -> Self {
        Self { data }
    }
}

impl<T> Index<usize> for DenseVec<T> {
    type Output = T;

    #[inline(always)]
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for DenseVec<T> {
    #[inline(always)]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

// ---------------------------------------------------------------------------
// Allocation-free slice kernels. Shapes are the caller's responsibility and
// only checked in debug builds.
// ---------------------------------------------------------------------------

/// `y = A x` for a row-major `rows x cols` matrix.
#[inline]
pub fn gemv<T: Real>(a: &[T], rows: usize, cols: usize, x: &[T], y: &mut [T]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (&ar, &xc) in row.iter().zip(x) {
            acc += ar * xc;
        }
        *yr = acc;
    }
}

/// `y = Aᵀ x`. Accumulation runs over rows in ascending order.
#[inline]
pub fn gemv_t<T: Real>(a: &[T], rows: usize, cols: usize, x: &[T], y: &mut [T]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for (c, yc) in y.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (r, &xr) in x.iter().enumerate() {
            acc += a[r * cols + c] * xr;
        }
        *yc = acc;
    }
}

/// `y += A x`.
#[inline]
pub fn gemv_acc<T: Real>(a: &[T], rows: usize, cols: usize, x: &[T], y: &mut [T]) {
    debug_assert_eq!(a.len(), rows * cols);
    for (r, yr) in y.iter_mut().enumerate().take(rows) {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = T::zero();
        for (&ar, &xc) in row.iter().zip(x) {
            acc += ar * xc;
        }
        *yr += acc;
    }
}

/// `y += Aᵀ x`.
#[inline]
pub fn gemv_t_acc<T: Real>(a: &[T], rows: usize, cols: usize, x: &[T], y: &mut [T]) {
    debug_assert_eq!(a.len(), rows * cols);
    for (c, yc) in y.iter_mut().enumerate().take(cols) {
        let mut acc = T::zero();
        for (r, &xr) in x.iter().enumerate().take(rows) {
            acc += a[r * cols + c] * xr;
        }
        *yc += acc;
    }
}

/// `C = A B` with `A: m x k`, `B: k x n`, all row-major.
#[inline]
pub fn gemm<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for p in 0..k {
                acc += a[i * k + p] * b[p * n + j];
            }
            c[i * n + j] = acc;
        }
    }
}

#[inline]
pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// `y += a x`.
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm2_sq<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

#[inline]
pub fn norm_inf<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
}

/// ∞-norm of `x - y`.
#[inline]
pub fn diff_norm_inf<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
}

pub fn norms<T: Real>(x: &[T]) -> Norms<T> {
    let mut one = T::zero();
    let mut inf = T::zero();
    let mut sq = T::zero();
    for &v in x {
        let a = v.abs();
        one += a;
        inf = inf.max(a);
        sq += v * v;
    }
    Norms {
        two: sq.sqrt(),
        inf,
        one,
    }
}

/// 3-vector cross product.
#[inline(always)]
pub fn cross3<T: Real>(a: &[T], b: &[T]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Explicit inverse of a 3x3 row-major matrix via cofactors.
pub fn inverse3<T: Real>(m: &[T; 9]) -> Result<[T; 9]> {
    let c00 = m[4] * m[8] - m[5] * m[7];
    let c01 = m[5] * m[6] - m[3] * m[8];
    let c02 = m[3] * m[7] - m[4] * m[6];
    let det = m[0] * c00 + m[1] * c01 + m[2] * c02;
    let scale = m.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    if !(det.abs() > T::epsilon() * scale * scale * scale) {
        return Err(Error::Domain("3x3 matrix is singular".into()));
    }
    let inv_det = T::one() / det;
    Ok([
        c00 * inv_det,
        (m[2] * m[7] - m[1] * m[8]) * inv_det,
        (m[1] * m[5] - m[2] * m[4]) * inv_det,
        c01 * inv_det,
        (m[0] * m[8] - m[2] * m[6]) * inv_det,
        (m[2] * m[3] - m[0] * m[5]) * inv_det,
        c02 * inv_det,
        (m[1] * m[6] - m[0] * m[7]) * inv_det,
        (m[0] * m[4] - m[1] * m[3]) * inv_det,
    ])
}
