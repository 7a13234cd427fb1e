//! Dense row-major linear algebra in 64-bit floats.
//!
//! Shapes and finiteness are validated when a [`Matrix`] or [`Vector`] is
//! built from caller data. Values produced internally by arithmetic are not
//! re-validated.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, Index};

use crate::error::{Error, Result};

/// Default relative tolerance for [`Matrix::spectral_norm`].
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Default iteration cap for [`Matrix::spectral_norm`].
pub const SPECTRAL_MAX_ITERS: usize = 10_000;

fn check_finite(what: &'static str, data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators let the compiler vectorize the reduction
    // while keeping the summation order fixed.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// A dense vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_finite("vector", &entries)?;
        Ok(Self(entries))
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Wraps values computed inside the crate without re-checking them.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                op: "dot",
                left: (self.dim(), 1),
                right: (other.dim(), 1),
            });
        }
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Vector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                op: "distance",
                left: (self.dim(), 1),
                right: (other.dim(), 1),
            });
        }
        Ok(distance(&self.0, &other.0))
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    libm::sqrt(s)
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A dense row-major matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or(Error::InvalidArgument(alloc::format!(
                "matrix shape {rows}x{cols} overflows"
            )))?;
        if data.len() != expected {
            return Err(Error::BadLength {
                what: "matrix",
                len: data.len(),
                expected,
            });
        }
        check_finite("matrix", &data)?;
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::BadLength {
                    what: "matrix row",
                    len: r.len(),
                    expected: cols,
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        (r < self.rows && c < self.cols).then(|| self.data[r * self.cols + c])
    }

    /// Row `i` as a slice. Panics when `i` is out of range.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|v| v * c).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// `A v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok(Vector::from_raw(self.matvec_unchecked(v)))
    }

    pub(crate) fn matvec_unchecked(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`.
    pub fn matvec_transpose(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "matvec_transpose",
                left: (self.cols, self.rows),
                right: (v.len(), 1),
            });
        }
        Ok(Vector::from_raw(self.matvec_transpose_unchecked(v)))
    }

    pub(crate) fn matvec_transpose_unchecked(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// `A B`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(self.view(), other.view(), 0.0, &mut out);
        Ok(out)
    }

    /// Euclidean norm of row `i`.
    pub fn row_l2_norm(&self, i: usize) -> Result<f64> {
        if i >= self.rows {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.rows,
            });
        }
        Ok(norm2(self.row(i)))
    }

    /// Largest singular value by power iteration on `AᵀA`.
    ///
    /// Starts from the normalized all-ones vector. If that start lies in the
    /// null space of `A` the iteration restarts from `(1, 2, 3, ...)`, then
    /// from the largest-norm coordinate axis. Converged when the estimate
    /// changes by at most `tol` relative between iterations.
    pub fn spectral_norm(&self, tol: f64, max_iters: usize) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "spectral_norm tolerance must be positive, got {tol}"
            )));
        }
        let n = self.cols;
        if n == 0 || self.rows == 0 || self.data.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }

        let ones: Vec<f64> = vec![1.0; n];
        let ramp: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let axis = {
            let best = (0..n)
                .max_by(|&a, &b| {
                    let na = self.column(a).iter().map(|v| v * v).sum::<f64>();
                    let nb = self.column(b).iter().map(|v| v * v).sum::<f64>();
                    na.partial_cmp(&nb).unwrap_or(core::cmp::Ordering::Equal)
                })
                .unwrap_or(0);
            let mut e = vec![0.0; n];
            e[best] = 1.0;
            e
        };

        let mut start = None;
        for candidate in [ones, ramp, axis] {
            let mut v = candidate;
            let s = norm2(&v);
            v.iter_mut().for_each(|x| *x /= s);
            if norm2(&self.matvec_unchecked(&v)) > 0.0 {
                start = Some(v);
                break;
            }
        }
        let mut v = start.expect("a nonzero matrix has a nonzero column");

        let mut prev = 0.0;
        let mut sigma = 0.0;
        for iter in 0..max_iters {
            let w = self.matvec_unchecked(&v);
            sigma = norm2(&w);
            let mut next = self.matvec_transpose_unchecked(&w);
            let nn = norm2(&next);
            if nn == 0.0 {
                return Ok(sigma);
            }
            next.iter_mut().for_each(|x| *x /= nn);
            if iter > 0 && libm::fabs(sigma - prev) <= tol * sigma {
                return Ok(sigma);
            }
            prev = sigma;
            v = next;
        }
        let w = self.matvec_unchecked(&v);
        let atw = self.matvec_transpose_unchecked(&w);
        let lambda = sigma * sigma;
        let residual = norm2(
            &atw.iter()
                .zip(&v)
                .map(|(a, b)| a - lambda * b)
                .collect::<Vec<_>>(),
        );
        Err(Error::NotConverged {
            iterations: max_iters,
            estimate: sigma,
            residual,
            last_iterate: v,
        })
    }

    pub(crate) fn view(&self) -> View<'_> {
        View {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
        }
    }
}

/// Borrowed strided matrix operand for [`gemm`].
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> View<'a> {
    pub fn row_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        View {
            data,
            rows,
            cols,
            rs: cols as isize,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        View {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn max_offset(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        (self.rows as isize - 1) as usize * self.rs as usize
            + (self.cols as isize - 1) as usize * self.cs as usize
    }
}

/// `out ← a·b + beta·out` for row-major `out`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, beta: f64, out: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!((out.rows, out.cols), (a.rows, b.cols), "gemm output shape");
    if a.rows == 0 || b.cols == 0 {
        return;
    }
    if a.cols == 0 {
        out.data.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    assert!(a.max_offset() < a.data.len());
    assert!(b.max_offset() < b.data.len());
    // SAFETY: every (row, col) offset of both operands was bounds-checked
    // above, strides are non-negative, and `out` is an exclusively borrowed
    // row-major buffer of exactly a.rows × b.cols elements.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let v = Matrix::identity(2).matvec(&[3.0, 4.0]).unwrap();
        assert_eq!(v.as_slice(), &[3.0, 4.0]);
        let v = m(&[&[1.0, 2.0], &[3.0, 4.0]]).matvec(&[1.0, 1.0]).unwrap();
        assert_eq!(v.as_slice(), &[3.0, 7.0]);
        let v = Matrix::zeros(3, 2).matvec(&[5.0, -2.0]).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn matvec_reports_both_shapes() {
        let err = Matrix::zeros(2, 3).matvec(&[1.0, 2.0]).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                op: "matvec",
                left: (2, 3),
                right: (2, 1)
            }
        );
    }

    #[test]
    fn construction_rejects_bad_data() {
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0; 3]),
            Err(Error::BadLength { .. })
        ));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            Vector::new(vec![f64::INFINITY]),
            Err(Error::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn row_norm_examples() {
        let a = m(&[&[3.0, 4.0, 0.0, 0.0], &[0.0; 4], &[1.0, 1.0, 1.0, 1.0]]);
        assert_eq!(a.row_l2_norm(0).unwrap(), 5.0);
        assert_eq!(a.row_l2_norm(1).unwrap(), 0.0);
        assert_eq!(a.row_l2_norm(2).unwrap(), 2.0);
        assert_eq!(
            a.row_l2_norm(3),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn spectral_norm_examples() {
        let d = m(&[&[3.0, 0.0], &[0.0, 1.0]]);
        assert_relative_eq!(
            d.spectral_norm(SPECTRAL_TOL, SPECTRAL_MAX_ITERS).unwrap(),
            3.0,
            max_relative = 1e-9
        );
        assert_eq!(
            Matrix::zeros(3, 2)
                .spectral_norm(SPECTRAL_TOL, SPECTRAL_MAX_ITERS)
                .unwrap(),
            0.0
        );
        // Closed-form 2×2 SVD: σ² are the eigenvalues of AᵀA = [[0,0],[0,4]].
        let a = m(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert_relative_eq!(
            a.spectral_norm(SPECTRAL_TOL, SPECTRAL_MAX_ITERS).unwrap(),
            2.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn spectral_norm_restarts_off_null_space() {
        // All-ones lies in the null space of this matrix.
        let a = m(&[&[1.0, -1.0], &[2.0, -2.0]]);
        let s = a.spectral_norm(SPECTRAL_TOL, SPECTRAL_MAX_ITERS).unwrap();
        assert_relative_eq!(s, libm::sqrt(10.0), max_relative = 1e-9);
    }

    #[test]
    fn spectral_norm_reports_non_convergence() {
        // Equal top singular values on orthogonal inputs converge immediately,
        // so use a slow ratio and a tiny iteration budget instead.
        let a = m(&[&[1.0, 0.0], &[0.0, 0.999]]);
        match a.spectral_norm(1e-15, 3) {
            Err(Error::NotConverged {
                iterations,
                last_iterate,
                residual,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(last_iterate.len(), 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn matmul_matches_naive() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[4.0, 5.0, 10.0, 11.0]);
        let mut ct = Matrix::zeros(2, 2);
        gemm(b.view().t(), a.view().t(), 0.0, &mut ct);
        assert_eq!(ct.as_slice(), c.transpose().as_slice());
    }
}
