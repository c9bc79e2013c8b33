//! Dense complex linear algebra used by every precoding scheme.
//!
//! Matrices are small (K x N_t with a handful of users), so everything is a
//! straightforward row-major implementation without blocking.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("matrix must be at least 1x1"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch("entry count does not match shape"));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Real-valued matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix with real entries.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("columns differ in length"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            data.extend(columns.iter().map(|c| c[r]));
        }
        Self::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn conj_transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    ///
    /// Panics if the inner dimensions differ.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "vector length differs from column count");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// Entry-wise sum.
    pub fn add(&self, rhs: &Self) -> Self {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shapes differ");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shapes differ");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let data = self.data.iter().map(|z| z * s).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Multiplies column `c` by `d[c]`.
    pub fn scale_columns(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for r in 0..self.rows {
            for (c, &s) in d.iter().enumerate() {
                out[(r, c)] *= s;
            }
        }
        out
    }

    /// Multiplies row `r` by `d[r]`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.rows);
        let mut out = self.clone();
        for (r, &s) in d.iter().enumerate() {
            for z in &mut out.data[r * self.cols..(r + 1) * self.cols] {
                *z *= s;
            }
        }
        out
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest absolute entry above the main diagonal.
    pub fn max_abs_upper(&self) -> f64 {
        let mut m = 0.0_f64;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                m = m.max(self[(r, c)].norm());
            }
        }
        m
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Plain bilinear product `sum a_i b_i` (no conjugation).
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x * y)
}

pub fn vector_norm(v: &[C64]) -> f64 {
    v.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
}

/// Factors `A = L Q` of a full-row-rank K x N_t matrix.
///
/// `L` is lower triangular with a real positive diagonal, so the
/// factorization is unique.
#[derive(Clone, Debug, PartialEq)]
pub struct LqFactors {
    pub l: ComplexMatrix,
    pub q: ComplexMatrix,
    /// Diagonal of `L`, all strictly positive.
    pub diag: Vec<f64>,
}

impl LqFactors {
    pub fn users(&self) -> usize {
        self.diag.len()
    }

    /// `sum_k 1 / l_kk^2`.
    pub fn inverse_diag_energy(&self) -> f64 {
        self.diag.iter().map(|l| 1.0 / (l * l)).sum()
    }

    /// `L Q`, the matrix that was factored.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.l.matmul(&self.q)
    }
}

/// LQ decomposition via Householder QR of `A^H`.
///
/// Each `l_kk` is made real positive by moving its phase into row `k` of `Q`.
pub fn lq_decompose(a: &ComplexMatrix) -> Result<LqFactors> {
    let k = a.rows();
    let nt = a.cols();
    if k > nt {
        return Err(Error::DimensionMismatch("LQ needs rows <= cols"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }

    // QR of A^H (nt x k): A^H = Qfull R.
    let mut r = a.conj_transpose();
    let mut qfull = ComplexMatrix::identity(nt);
    let mut v = vec![C64::new(0.0, 0.0); nt];
    for j in 0..k {
        let len = nt - j;
        let x: Vec<C64> = (j..nt).map(|i| r[(i, j)]).collect();
        let norm = vector_norm(&x);
        if norm == 0.0 {
            return Err(Error::RankDeficient);
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        v[..len].copy_from_slice(&x);
        v[0] -= alpha;
        let vnorm2: f64 = v[..len].iter().map(C64::norm_sqr).sum();
        if vnorm2 > 0.0 {
            let tau = 2.0 / vnorm2;
            // R <- H R on the trailing block.
            for c in j..k {
                let s = (0..len).fold(C64::new(0.0, 0.0), |acc, i| acc + v[i].conj() * r[(j + i, c)]);
                for i in 0..len {
                    r[(j + i, c)] -= v[i] * s * tau;
                }
            }
            // Q <- Q H.
            for row in 0..nt {
                let s = (0..len).fold(C64::new(0.0, 0.0), |acc, i| acc + qfull[(row, j + i)] * v[i]);
                for i in 0..len {
                    qfull[(row, j + i)] -= s * v[i].conj() * tau;
                }
            }
        }
        r[(j, j)] = alpha;
        for i in (j + 1)..nt {
            r[(i, j)] = C64::new(0.0, 0.0);
        }
    }

    // L = R^H restricted to the leading k x k block, Q = Qthin^H, with the
    // phase of each diagonal entry moved into Q.
    let mut l = ComplexMatrix::zeros(k, k);
    let mut q = ComplexMatrix::zeros(k, nt);
    let mut diag = Vec::with_capacity(k);
    for j in 0..k {
        let rjj = r[(j, j)];
        let mag = rjj.norm();
        let ph = rjj / mag;
        diag.push(mag);
        // Row j of R times conj(ph) becomes column j of L after the transpose.
        for c in j..k {
            let entry = r[(j, c)] * ph.conj();
            l[(c, j)] = entry.conj();
        }
        l[(j, j)] = C64::new(mag, 0.0);
        for col in 0..nt {
            q[(j, col)] = (qfull[(col, j)] * ph).conj();
        }
    }

    // Conditioning check: 1/||L^-1||_F <= sigma_min and ||L||_F >= sigma_max,
    // so this is a conservative test of sigma_min > 1e-10 sigma_max.
    let l_inv = lower_triangular_inverse(&l)?;
    let inv_norm = l_inv.frobenius_norm();
    if !inv_norm.is_finite() || 1.0 / inv_norm <= 1e-10 * l.frobenius_norm() {
        return Err(Error::RankDeficient);
    }

    Ok(LqFactors { l, q, diag })
}

/// Inverse of a square lower-triangular matrix by forward substitution.
pub fn lower_triangular_inverse(l: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = l.rows();
    if l.cols() != n {
        return Err(Error::DimensionMismatch("triangular inverse needs a square matrix"));
    }
    if (0..n).any(|i| l[(i, i)].norm() == 0.0) {
        return Err(Error::RankDeficient);
    }
    let mut inv = ComplexMatrix::zeros(n, n);
    for c in 0..n {
        inv[(c, c)] = l[(c, c)].inv();
        for r in (c + 1)..n {
            let mut acc = C64::new(0.0, 0.0);
            for m in c..r {
                acc += l[(r, m)] * inv[(m, c)];
            }
            inv[(r, c)] = -acc / l[(r, r)];
        }
    }
    Ok(inv)
}

/// Right inverse `A^H (A A^H)^-1` of a full-row-rank matrix, computed as
/// `Q^H L^-1` from the LQ factors.
pub fn pseudo_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let lq = lq_decompose(a)?;
    Ok(pseudo_inverse_from_lq(&lq))
}

pub(crate) fn pseudo_inverse_from_lq(lq: &LqFactors) -> ComplexMatrix {
    let l_inv = lower_triangular_inverse(&lq.l).expect("LQ factors have a positive diagonal");
    lq.q.conj_transpose().matmul(&l_inv)
}

const POWER_ITER_TOL: f64 = 1e-12;
const POWER_ITER_MAX: usize = 10_000;

/// Unit vector `v` maximizing `||A v||`, by power iteration on `A^H A`.
///
/// Starts from the normalized all-ones vector. The first component with
/// magnitude above 1e-12 is made real positive.
pub fn dominant_right_singular_vector(a: &ComplexMatrix) -> Result<Vec<C64>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if a.frobenius_norm_sqr() == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let n = a.cols();
    let gram = a.conj_transpose().matmul(a);

    let mut v = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    if vector_norm(&gram.mul_vec(&v)) == 0.0 {
        // All-ones lies in the null space; restart on the strongest column.
        let best = (0..n)
            .map(|c| (c, gram[(c, c)].re))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0;
        v = vec![C64::new(0.0, 0.0); n];
        v[best] = C64::new(1.0, 0.0);
    }

    for _ in 0..POWER_ITER_MAX {
        let mut w = gram.mul_vec(&v);
        let norm = vector_norm(&w);
        for z in &mut w {
            *z /= norm;
        }
        fix_phase(&mut w);
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        v = w;
        if delta < POWER_ITER_TOL {
            break;
        }
    }
    Ok(v)
}

fn fix_phase(v: &mut [C64]) {
    if let Some(idx) = v.iter().position(|z| z.norm() > 1e-12) {
        let first = v[idx];
        let rot = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
        v[idx] = C64::new(first.norm(), 0.0);
    }
}
