//! Dense f64 kernel: row-major matrices, masked softmax, layer normalization
//! with recorded statistics, and the activations used by the encoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance floor added inside every layer normalization.
pub const LN_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// `self · rhs`
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::config(format!(
                "matmul shape mismatch: {:?} x {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ`
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::config(format!(
                "matmul_t shape mismatch: {:?} x {:?}^T",
                self.shape(),
                rhs.shape()
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        Ok(out)
    }

    /// Columns `start..start + len` as a new matrix.
    pub fn col_slice(&self, start: usize, len: usize) -> Matrix {
        Matrix::from_fn(self.rows, len, |r, c| self.get(r, start + c))
    }

    /// Adds `v` to every row.
    pub fn add_row_vector(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.cols {
            return Err(Error::config(format!(
                "row vector of length {} added to {} columns",
                v.len(),
                self.cols
            )));
        }
        for row in self.data.chunks_exact_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(v) {
                *x += b;
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `v · m` for a row vector `v`.
pub fn vec_matmul(v: &[f64], m: &Matrix) -> Result<Vec<f64>> {
    if v.len() != m.rows() {
        return Err(Error::config(format!(
            "vector of length {} times {:?} matrix",
            v.len(),
            m.shape()
        )));
    }
    let mut out = vec![0.0; m.cols()];
    for (k, &a) in v.iter().enumerate() {
        for (o, &b) in out.iter_mut().zip(m.row(k)) {
            *o += a * b;
        }
    }
    Ok(out)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNormParams {
    pub fn identity(d: usize) -> Self {
        Self {
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Per-token statistics a layer normalization divided by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mu: Vec<f64>,
    /// `sqrt(var + eps)`
    pub sigma: Vec<f64>,
}

/// Layer normalization with the crate-wide [`LN_EPS`].
pub fn layer_norm(x: &Matrix, p: &LayerNormParams) -> Result<(Matrix, NormStats)> {
    layer_norm_eps(x, p, LN_EPS, false)
}

/// Layer normalization with an explicit epsilon. With `zero_beta` the shift is
/// dropped while the scale stays in place.
pub fn layer_norm_eps(
    x: &Matrix,
    p: &LayerNormParams,
    eps: f64,
    zero_beta: bool,
) -> Result<(Matrix, NormStats)> {
    let d = x.cols();
    if p.gamma.len() != d || p.beta.len() != d {
        return Err(Error::config(format!(
            "layer norm params of width {}/{} applied to {d} columns",
            p.gamma.len(),
            p.beta.len()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), d);
    let mut mu = Vec::with_capacity(x.rows());
    let mut sigma = Vec::with_capacity(x.rows());
    for t in 0..x.rows() {
        let row = x.row(t);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = (var + eps).sqrt();
        let o = out.row_mut(t);
        for j in 0..d {
            let normed = p.gamma[j] * ((row[j] - mean) / s);
            o[j] = if zero_beta { normed } else { normed + p.beta[j] };
        }
        mu.push(mean);
        sigma.push(s);
    }
    Ok((out, NormStats { mu, sigma }))
}

/// Softmax restricted to `mask`; masked-out entries are exactly zero.
pub fn softmax_masked(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::config(format!(
            "{} logits with a mask of {}",
            logits.len(),
            mask.len()
        )));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoLegalMoves);
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

/// Row-wise unmasked softmax in place.
pub fn softmax_rows(m: &mut Matrix) {
    let cols = m.cols();
    for row in m.data_mut().chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

#[inline]
pub fn squared_relu(x: f64) -> f64 {
    let r = x.max(0.0);
    r * r
}

#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}
