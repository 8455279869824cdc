//! Dense linear algebra, stable softmax / log-sum-exp and power iteration.
//!
//! Everything here is plain `f64` over row-major `Vec` storage. Values are
//! immutable once constructed and safe to share across threads; all
//! operations are pure functions of their inputs.

mod rng;

pub use rng::Rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from row-major data. Errors if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vector(&self, i: usize) -> DenseVector {
        DenseVector::new(self.row(i).to_vec())
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &DenseVector) -> Result<DenseVector> {
        if self.cols != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} * len-{}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v.as_slice());
        }
        Ok(DenseVector::new(out))
    }

    /// `self^T * v`.
    pub fn transpose_matvec(&self, v: &DenseVector) -> Result<DenseVector> {
        if self.rows != v.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}^T * len-{}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v.as_slice()[i];
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        Ok(DenseVector::new(out))
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Self {
        Self(data)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit-scaled copy; returns a zero vector unchanged.
    pub fn normalized(&self) -> DenseVector {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn scale(&self, s: f64) -> DenseVector {
        Self(self.0.iter().map(|x| x * s).collect())
    }

    pub fn add(&self, other: &DenseVector) -> DenseVector {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// log Σ exp(v_i), computed by max-shifting. Exact for single-element input.
///
/// `-inf` entries are tolerated (they contribute zero mass); an all-`-inf`
/// input returns `-inf`.
pub fn log_sum_exp(v: &DenseVector) -> Result<f64> {
    log_sum_exp_slice(v.as_slice())
}

pub(crate) fn log_sum_exp_slice(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if v.len() == 1 {
        return Ok(v[0]);
    }
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = v.iter().map(|x| (x - m).exp()).sum();
    Ok(m + sum.ln())
}

/// Numerically stable softmax: entries non-negative, summing to 1.
pub fn softmax(v: &DenseVector) -> Result<DenseVector> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let lse = log_sum_exp(v)?;
    Ok(DenseVector::new(
        v.as_slice().iter().map(|x| (x - lse).exp()).collect(),
    ))
}

/// Shannon entropy of a softmax distribution, straight from the logits.
pub fn softmax_entropy(logits: &[f64]) -> Result<f64> {
    let lse = log_sum_exp_slice(logits)?;
    let mut h = 0.0;
    for &x in logits {
        let logp = x - lse;
        let p = logp.exp();
        if p > 0.0 {
            h -= p * logp;
        }
    }
    Ok(h)
}

/// Largest-singular-value estimate of `w` by power iteration.
///
/// Returns `(sigma, u, v)` with `u`, `v` unit-norm left/right singular
/// vector estimates. Stops early once sigma changes by less than 1e-10
/// between iterations. A zero matrix is not an error: it yields
/// `sigma = 0` with `u0` normalized unchanged and `v = e_0`.
pub fn power_iteration(
    w: &DenseMatrix,
    iters: usize,
    u0: &DenseVector,
) -> Result<(f64, DenseVector, DenseVector)> {
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    if u0.len() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "u0 length {} != rows {}",
            u0.len(),
            w.rows()
        )));
    }
    if u0.norm() == 0.0 {
        return Err(Error::InvalidArgument("u0 must be nonzero".into()));
    }

    let mut u = u0.normalized();
    let mut v = {
        let mut e = DenseVector::zeros(w.cols());
        e[0] = 1.0;
        e
    };
    let mut sigma = 0.0;
    for _ in 0..iters {
        let vt = w.transpose_matvec(&u)?;
        let vn = vt.norm();
        if vn == 0.0 {
            // u is in the left null space (e.g. zero matrix): report sigma 0.
            return Ok((0.0, u0.normalized(), v));
        }
        v = vt.scale(1.0 / vn);
        let ut = w.matvec(&v)?;
        let un = ut.norm();
        if un == 0.0 {
            return Ok((0.0, u0.normalized(), v));
        }
        u = ut.scale(1.0 / un);
        let prev = sigma;
        sigma = un;
        if (sigma - prev).abs() < 1e-10 {
            break;
        }
    }
    Ok((sigma, u, v))
}

/// Default iteration budget for [`power_iteration`].
pub const POWER_ITERS_DEFAULT: usize = 100;
