//! Row-major matrices over `f32`/`f64` and the few dense kernels the line
//! graph network needs. Products go through `matrixmultiply`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, AddAssign, Mul, Sub};

use crate::{Error, Result};

/// Scalar types the network runs in.
pub trait Real:
    Copy + Debug + PartialOrd + Default + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + AddAssign + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `c = alpha * op(a) * op(b) + beta * c` on raw strided storage.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], rsa: isize, csa: isize, b: &[Self], rsb: isize, csb: isize, beta: Self, c: &mut [Self]);
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[allow(unsafe_code)]
            fn gemm(
                m: usize, k: usize, n: usize, alpha: Self, a: &[Self], rsa: isize, csa: isize,
                b: &[Self], rsb: isize, csb: isize, beta: Self, c: &mut [Self],
            ) {
                assert!(c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                if k > 0 {
                    let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                        (rows - 1) * rs.unsigned_abs() + (cols - 1) * cs.unsigned_abs() + 1
                    };
                    assert!(a.len() >= span(m, k, rsa, csa) && b.len() >= span(k, n, rsb, csb));
                }
                // SAFETY: the asserts above bound every index the kernel touches
                // for non-negative strides, which is all this module passes.
                unsafe {
                    $gemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::ZERO; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("matrix", format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::ONE } else { T::ZERO })
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn convert<U: Real>(&self) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.to_f64().is_finite())
    }

    fn check(&self, other_rows: usize, op: &'static str, inner: usize) -> Result<()> {
        if inner != other_rows {
            return Err(Error::shape(op, format!("inner dims {inner} and {other_rows} differ")));
        }
        Ok(())
    }

    /// `self * b`
    pub fn matmul(&self, b: &Self) -> Result<Self> {
        self.check(b.rows, "matmul", self.cols)?;
        let mut c = Self::zeros(self.rows, b.cols);
        T::gemm(self.rows, self.cols, b.cols, T::ONE, &self.data, self.cols as isize, 1, &b.data, b.cols as isize, 1, T::ZERO, &mut c.data);
        Ok(c)
    }

    /// `selfᵀ * b`
    pub fn tmatmul(&self, b: &Self) -> Result<Self> {
        self.check(b.rows, "tmatmul", self.rows)?;
        let mut c = Self::zeros(self.cols, b.cols);
        T::gemm(self.cols, self.rows, b.cols, T::ONE, &self.data, 1, self.cols as isize, &b.data, b.cols as isize, 1, T::ZERO, &mut c.data);
        Ok(c)
    }

    /// `self * bᵀ`
    pub fn matmul_t(&self, b: &Self) -> Result<Self> {
        self.check(b.cols, "matmul_t", self.cols)?;
        let mut c = Self::zeros(self.rows, b.rows);
        T::gemm(self.rows, self.cols, b.rows, T::ONE, &self.data, self.cols as isize, 1, &b.data, 1, b.cols as isize, T::ZERO, &mut c.data);
        Ok(c)
    }

    /// Adds `bias` (1 x cols) to every row.
    pub fn add_row(&mut self, bias: &Self) {
        debug_assert_eq!(bias.data.len(), self.cols);
        for r in 0..self.rows {
            self.row_mut(r).iter_mut().zip(&bias.data).for_each(|(v, &b)| *v += b);
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        debug_assert_eq!(self.shape(), o.shape());
        self.data.iter_mut().zip(&o.data).for_each(|(v, &w)| *v += w);
    }

    /// Column sums as a 1 x cols matrix.
    pub fn col_sums(&self) -> Self {
        let mut out = Self::zeros(1, self.cols);
        for r in 0..self.rows {
            out.data.iter_mut().zip(self.row(r)).for_each(|(o, &v)| *o += v);
        }
        out
    }

    /// Concatenates two matrices with equal row counts side by side.
    pub fn hcat(&self, o: &Self) -> Self {
        debug_assert_eq!(self.rows, o.rows);
        let cols = self.cols + o.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(o.row(r));
        }
        Self { rows: self.rows, cols, data }
    }

    /// Column range `[start, start + width)`.
    pub fn columns(&self, start: usize, width: usize) -> Self {
        Self::from_fn(self.rows, width, |r, c| self.get(r, start + c))
    }

    pub fn relu(&self) -> Self {
        self.map(|v| if v > T::ZERO { v } else { T::ZERO })
    }
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending with matching unit eigenvectors.
pub fn symmetric_eigen3(m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let scale = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / libm::sqrt(t * t + 1.0);
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in &mut v {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = order.map(|i| a[i][i]);
    let vecs = order.map(|i| [v[0][i], v[1][i], v[2][i]]);
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_naive_loops() {
        let a = Matrix::<f64>::from_fn(3, 4, |r, c| (r * 4 + c) as f64 * 0.5 - 2.0);
        let b = Matrix::<f64>::from_fn(4, 2, |r, c| (r as f64 - c as f64) * 0.25);
        let naive = Matrix::from_fn(3, 2, |r, c| (0..4).map(|k| a.get(r, k) * b.get(k, c)).sum());
        assert_eq!(a.matmul(&b).unwrap(), naive);
        let at = Matrix::from_fn(4, 3, |r, c| a.get(c, r));
        assert_eq!(at.tmatmul(&b).unwrap(), naive);
        let bt = Matrix::from_fn(2, 4, |r, c| b.get(c, r));
        assert_eq!(a.matmul_t(&bt).unwrap(), naive);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn eigen3_recovers_known_spectrum() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let (vals, vecs) = symmetric_eigen3(m);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12 && (vals[2] - 5.0).abs() < 1e-12);
        let v = vecs[0];
        assert!((v[0].abs() - libm::sqrt(0.5)).abs() < 1e-9 && (v[0] + v[1]).abs() < 1e-9);
    }
}
