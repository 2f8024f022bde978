//! Dense f64 tensor core for the model.
//!
//! Everything here is 64-bit and deterministic: `matmul` runs a fixed loop
//! order so repeated calls are bit-identical, softmax subtracts the row max
//! before exponentiating, and layer norm uses the population variance. The
//! module also owns the parameter store (value/gradient/Adam moments per
//! named tensor) and [`finite_diff_gradient`], the central-difference oracle
//! the model's analytic backward pass is checked against.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probability clamp used by the weighted BCE loss.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch: left is {lr}x{lc}, right is {rr}x{rc}")]
    ShapeMismatch { lr: usize, lc: usize, rr: usize, rc: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("row {row} is fully masked")]
    FullyMaskedRow { row: usize },
    #[error("parameter {0:?} not found")]
    UnknownParam(String),
}

/// Row-major dense matrix of 64-bit floats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    /// Build from row-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "push_row width");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Drop the first `n` rows in place.
    pub fn drop_front_rows(&mut self, n: usize) {
        assert!(n <= self.rows);
        self.data.drain(0..n * self.cols);
        self.rows -= n;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Matrix) -> Result<Matrix, NumericsError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::ShapeMismatch {
                lr: self.rows,
                lc: self.cols,
                rr: other.rows,
                rc: other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Take the column block `[c0, c0+width)` as a new matrix.
    pub fn col_block(&self, c0: usize, width: usize) -> Matrix {
        assert!(c0 + width <= self.cols);
        let mut out = Matrix::zeros(self.rows, width);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[c0..c0 + width]);
        }
        out
    }

    /// Write `block` into columns `[c0, c0+block.cols)`.
    pub fn set_col_block(&mut self, c0: usize, block: &Matrix) {
        assert_eq!(self.rows, block.rows);
        assert!(c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            let cols = self.cols;
            self.data[r * cols + c0..r * cols + c0 + block.cols].copy_from_slice(block.row(r));
        }
    }
}

/// Boolean matrix used as a softmax mask.
#[derive(Clone, Debug)]
pub struct BoolMat {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BoolMat {
    pub fn new(rows: usize, cols: usize, value: bool) -> Self {
        BoolMat { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }
}

/// Standard matrix product with a fixed i-k-j loop order, so the summation
/// order (and therefore the rounding) is identical on every call.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.cols != b.rows {
        return Err(NumericsError::ShapeMismatch { lr: a.rows, lc: a.cols, rr: b.rows, rc: b.cols });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Softmax over the slice in place, with max subtraction for stability.
/// The slice must be non-empty.
pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise masked softmax. Masked entries come out exactly zero; unmasked
/// entries of each row sum to one. Errors if any row is fully masked.
pub fn masked_softmax_rows(scores: &Matrix, mask: &BoolMat) -> Result<Matrix, NumericsError> {
    if scores.rows != mask.rows() || scores.cols != mask.cols() {
        return Err(NumericsError::ShapeMismatch {
            lr: scores.rows,
            lc: scores.cols,
            rr: mask.rows(),
            rc: mask.cols(),
        });
    }
    let mut out = Matrix::zeros(scores.rows, scores.cols);
    for r in 0..scores.rows {
        let mut keep: Vec<usize> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for c in 0..scores.cols {
            if mask.get(r, c) {
                keep.push(c);
                vals.push(scores.get(r, c));
            }
        }
        if keep.is_empty() {
            return Err(NumericsError::FullyMaskedRow { row: r });
        }
        softmax_in_place(&mut vals);
        for (c, v) in keep.into_iter().zip(vals) {
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// Per-vector cache kept by [`layer_norm_cached`] so the backward pass can
/// reuse the normalized values.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    pub x_hat: Vec<f64>,
    pub inv_std: f64,
}

/// Layer normalization with population variance:
/// `(x - mean) / sqrt(var + eps) * gamma + beta`.
pub fn layer_norm(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> Result<Vec<f64>, NumericsError> {
    Ok(layer_norm_cached(x, gamma, beta, eps)?.0)
}

/// Layer norm that also returns the normalization cache used by backprop.
pub fn layer_norm_cached(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> Result<(Vec<f64>, LayerNormCache), NumericsError> {
    if x.len() != gamma.len() || x.len() != beta.len() {
        return Err(NumericsError::LengthMismatch { left: x.len(), right: gamma.len().max(beta.len()) });
    }
    assert!(eps > 0.0, "layer_norm eps must be positive");
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + eps).sqrt();
    let x_hat: Vec<f64> = x.iter().map(|v| (v - mean) * inv_std).collect();
    let y = x_hat
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(xh, (g, b))| xh * g + b)
        .collect();
    Ok((y, LayerNormCache { x_hat, inv_std }))
}

/// Backward through one layer-norm vector. Returns `dx` and accumulates
/// parameter gradients into `d_gamma` / `d_beta`.
pub fn layer_norm_backward(
    dy: &[f64],
    gamma: &[f64],
    cache: &LayerNormCache,
    d_gamma: &mut [f64],
    d_beta: &mut [f64],
) -> Vec<f64> {
    let n = dy.len();
    let nf = n as f64;
    let mut dx_hat = vec![0.0; n];
    for i in 0..n {
        d_gamma[i] += dy[i] * cache.x_hat[i];
        d_beta[i] += dy[i];
        dx_hat[i] = dy[i] * gamma[i];
    }
    let mean_dx_hat = dx_hat.iter().sum::<f64>() / nf;
    let mean_dx_hat_xhat =
        dx_hat.iter().zip(&cache.x_hat).map(|(d, xh)| d * xh).sum::<f64>() / nf;
    (0..n)
        .map(|i| cache.inv_std * (dx_hat[i] - mean_dx_hat - cache.x_hat[i] * mean_dx_hat_xhat))
        .collect()
}

/// Weighted binary cross-entropy:
/// `mean_i -[pos_weight * y_i * ln p_i + (1 - y_i) * ln(1 - p_i)]`,
/// with probabilities clamped into `[BCE_EPS, 1 - BCE_EPS]`.
pub fn weighted_bce(p: &[f64], y: &[f64], pos_weight: f64) -> Result<f64, NumericsError> {
    if p.len() != y.len() {
        return Err(NumericsError::LengthMismatch { left: p.len(), right: y.len() });
    }
    assert!(!p.is_empty(), "weighted_bce on empty input");
    let mut sum = 0.0;
    for (&pi, &yi) in p.iter().zip(y) {
        let pc = pi.clamp(BCE_EPS, 1.0 - BCE_EPS);
        sum -= pos_weight * yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln();
    }
    Ok(sum / p.len() as f64)
}

/// One named parameter tensor with its gradient and Adam moment slots.
#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    m: Matrix,
    v: Matrix,
}

/// Ordered store of named parameter tensors. Iteration order is insertion
/// order, which keeps every pass over the parameters deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    /// Register a tensor. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        let name = name.into();
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter {name:?}"
        );
        let (r, c) = (value.rows(), value.cols());
        self.entries.push(ParamEntry {
            name,
            value,
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter()
    }

    pub fn get(&self, name: &str) -> Result<&Matrix, NumericsError> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.value)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Matrix, NumericsError> {
        self.entries
            .iter_mut()
            .find(|e| e.name == name)
            .map(|e| &mut e.value)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))
    }

    pub fn grad(&self, name: &str) -> Result<&Matrix, NumericsError> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.grad)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))
    }

    pub fn grad_mut(&mut self, name: &str) -> Result<&mut Matrix, NumericsError> {
        self.entries
            .iter_mut()
            .find(|e| e.name == name)
            .map(|e| &mut e.grad)
            .ok_or_else(|| NumericsError::UnknownParam(name.to_string()))
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.data().len()).sum()
    }
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update over every tensor in the store, applied in
/// place. `t` is the 1-based step index. Gradients are zeroed afterwards.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig, t: u64) {
    assert!(t >= 1, "adam_step: t must be >= 1");
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for e in &mut store.entries {
        let n = e.value.data().len();
        for i in 0..n {
            let g = e.grad.data()[i];
            let m = cfg.beta1 * e.m.data()[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * e.v.data()[i] + (1.0 - cfg.beta2) * g * g;
            e.m.data_mut()[i] = m;
            e.v.data_mut()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            e.value.data_mut()[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        e.grad.fill(0.0);
    }
}

/// Central-difference gradient of `f` with respect to every parameter in the
/// store: `(f(theta + h e) - f(theta - h e)) / (2h)` per coordinate. `f` must
/// be a pure, deterministic function of the store. Returns one gradient
/// matrix per entry, in store order.
pub fn finite_diff_gradient<F>(store: &mut ParamStore, h: f64, mut f: F) -> Vec<(String, Matrix)>
where
    F: FnMut(&ParamStore) -> f64,
{
    assert!(h > 0.0, "finite_diff_gradient: h must be positive");
    let mut out = Vec::with_capacity(store.entries.len());
    for idx in 0..store.entries.len() {
        let (rows, cols) = {
            let e = &store.entries[idx];
            (e.value.rows(), e.value.cols())
        };
        let mut grad = Matrix::zeros(rows, cols);
        let n = rows * cols;
        for i in 0..n {
            let orig = store.entries[idx].value.data()[i];
            store.entries[idx].value.data_mut()[i] = orig + h;
            let plus = f(store);
            store.entries[idx].value.data_mut()[i] = orig - h;
            let minus = f(store);
            store.entries[idx].value.data_mut()[i] = orig;
            grad.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
        out.push((store.entries[idx].name.clone(), grad));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let prod = matmul(&a, &ident(3)).unwrap();
        assert_eq!(prod, a);
    }

    #[test]
    fn matmul_hand_example() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_vec(2, 1, vec![1.0, 1.0]);
        let p = matmul(&a, &b).unwrap();
        assert_eq!(p.data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let z = Matrix::zeros(3, 4);
        let b = Matrix::from_vec(4, 2, (0..8).map(f64::from).collect());
        let p = matmul(&z, &b).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        let err = matmul(&a, &b).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("2x2"), "{err}");
    }

    #[test]
    fn matmul_bit_deterministic() {
        let mut r = crate::SeededRng::new(11);
        let a = Matrix::from_vec(7, 9, (0..63).map(|_| r.normal()).collect());
        let b = Matrix::from_vec(9, 5, (0..45).map(|_| r.normal()).collect());
        let p1 = matmul(&a, &b).unwrap();
        let p2 = matmul(&a, &b).unwrap();
        assert_eq!(p1.data(), p2.data());
    }

    #[test]
    fn softmax_uniform_over_unmasked() {
        let s = Matrix::zeros(1, 4);
        let mut mask = BoolMat::new(1, 4, true);
        mask.set(0, 3, false);
        let p = masked_softmax_rows(&s, &mask).unwrap();
        for c in 0..3 {
            assert!((p.get(0, c) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(p.get(0, 3), 0.0);
    }

    #[test]
    fn softmax_single_survivor() {
        let s = Matrix::zeros(1, 2);
        let mut mask = BoolMat::new(1, 2, false);
        mask.set(0, 0, true);
        let p = masked_softmax_rows(&s, &mask).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn softmax_hand_example() {
        // softmax([ln 1, ln 3]) = [0.25, 0.75]
        let s = Matrix::from_vec(1, 2, vec![0.0, 3.0f64.ln()]);
        let mask = BoolMat::new(1, 2, true);
        let p = masked_softmax_rows(&s, &mask).unwrap();
        assert!((p.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((p.get(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_fully_masked_row_errors() {
        let s = Matrix::zeros(2, 2);
        let mut mask = BoolMat::new(2, 2, true);
        mask.set(1, 0, false);
        mask.set(1, 1, false);
        let err = masked_softmax_rows(&s, &mask).unwrap_err();
        assert!(matches!(err, NumericsError::FullyMaskedRow { row: 1 }));
    }

    #[test]
    fn softmax_shift_invariant() {
        let mut r = crate::SeededRng::new(5);
        for _ in 0..20 {
            let vals: Vec<f64> = (0..6).map(|_| r.normal()).collect();
            let shifted: Vec<f64> = vals.iter().map(|v| v + 3.7).collect();
            let mut a = vals.clone();
            let mut b = shifted.clone();
            softmax_in_place(&mut a);
            softmax_in_place(&mut b);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_constant_vector_gives_beta() {
        let x = vec![5.0; 4];
        let gamma = vec![2.0; 4];
        let beta = vec![0.5, -0.5, 1.0, 0.0];
        let y = layer_norm(&x, &gamma, &beta, 1e-5).unwrap();
        for (yi, bi) in y.iter().zip(&beta) {
            assert!((yi - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_pm_one() {
        let y = layer_norm(&[-1.0, 1.0], &[1.0, 1.0], &[0.0, 0.0], 1e-12).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-6);
        assert!((y[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn layer_norm_normalizes_mean_and_var() {
        let x = vec![0.3, -1.2, 4.5, 2.2, -0.7];
        let n = x.len();
        let y = layer_norm(&x, &vec![1.0; n], &vec![0.0; n], 1e-9).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn layer_norm_shift_invariant() {
        let x = vec![0.9, -0.3, 2.4, 1.1];
        let n = x.len();
        let shifted: Vec<f64> = x.iter().map(|v| v + 11.0).collect();
        let a = layer_norm(&x, &vec![1.0; n], &vec![0.0; n], 1e-8).unwrap();
        let b = layer_norm(&shifted, &vec![1.0; n], &vec![0.0; n], 1e-8).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn layer_norm_length_mismatch() {
        let err = layer_norm(&[1.0, 2.0], &[1.0], &[0.0, 0.0], 1e-5).unwrap_err();
        assert!(matches!(err, NumericsError::LengthMismatch { .. }));
    }

    #[test]
    fn layer_norm_backward_matches_finite_difference() {
        let mut r = crate::SeededRng::new(8);
        let n = 6;
        let x: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let gamma: Vec<f64> = (0..n).map(|_| 1.0 + 0.1 * r.normal()).collect();
        let beta: Vec<f64> = (0..n).map(|_| 0.1 * r.normal()).collect();
        let w: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let eps = 1e-5;
        // scalar objective: dot(w, layer_norm(x))
        let f = |x: &[f64]| -> f64 {
            layer_norm(x, &gamma, &beta, eps)
                .unwrap()
                .iter()
                .zip(&w)
                .map(|(y, wi)| y * wi)
                .sum()
        };
        let (_, cache) = layer_norm_cached(&x, &gamma, &beta, eps).unwrap();
        let mut dg = vec![0.0; n];
        let mut db = vec![0.0; n];
        let dx = layer_norm_backward(&w, &gamma, &cache, &mut dg, &mut db);
        let h = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-6, "dx[{i}]: fd={fd} analytic={}", dx[i]);
        }
    }

    #[test]
    fn bce_half_probability_is_ln2() {
        let p = vec![0.5; 8];
        let y = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let loss = weighted_bce(&p, &y, 1.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_is_tiny() {
        let p = vec![1.0, 0.0, 1.0];
        let y = vec![1.0, 0.0, 1.0];
        let loss = weighted_bce(&p, &y, 1.0).unwrap();
        assert!(loss <= -(1.0f64 - BCE_EPS).ln() + 1e-15);
    }

    #[test]
    fn bce_pos_weight_scales_positive_term() {
        let loss = weighted_bce(&[0.5], &[1.0], 2.0).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_length_mismatch() {
        assert!(weighted_bce(&[0.5], &[1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_fixed_point() {
        let mut store = ParamStore::new();
        store.insert("w", Matrix::from_vec(1, 2, vec![0.4, -0.6]));
        let before = store.get("w").unwrap().clone();
        adam_step(&mut store, &AdamConfig::default(), 1);
        assert_eq!(store.get("w").unwrap(), &before);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let mut store = ParamStore::new();
        store.insert("w", Matrix::from_vec(1, 1, vec![1.0]));
        store.grad_mut("w").unwrap().set(0, 0, 1.0);
        adam_step(&mut store, &cfg, 1);
        // bias-corrected m_hat/sqrt(v_hat) = 1 at t=1, so the step is ~lr
        let w = store.get("w").unwrap().get(0, 0);
        assert!((w - (1.0 - 0.01)).abs() < 1e-6, "w={w}");
        // gradient cleared afterwards
        assert_eq!(store.grad("w").unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn adam_identical_params_stay_identical() {
        let mut store = ParamStore::new();
        store.insert("a", Matrix::from_vec(1, 1, vec![0.3]));
        store.insert("b", Matrix::from_vec(1, 1, vec![0.3]));
        for t in 1..=5 {
            store.grad_mut("a").unwrap().set(0, 0, 0.7);
            store.grad_mut("b").unwrap().set(0, 0, 0.7);
            adam_step(&mut store, &AdamConfig::default(), t);
        }
        assert_eq!(
            store.get("a").unwrap().get(0, 0),
            store.get("b").unwrap().get(0, 0)
        );
    }

    #[test]
    fn finite_diff_quadratic() {
        let mut store = ParamStore::new();
        store.insert("theta", Matrix::from_vec(1, 1, vec![3.0]));
        let grads = finite_diff_gradient(&mut store, 1e-5, |s| {
            let t = s.get("theta").unwrap().get(0, 0);
            t * t
        });
        assert!((grads[0].1.get(0, 0) - 6.0).abs() < 1e-8);
        // store restored
        assert_eq!(store.get("theta").unwrap().get(0, 0), 3.0);
    }

    #[test]
    fn finite_diff_constant_function_zero() {
        let mut store = ParamStore::new();
        store.insert("w", Matrix::zeros(2, 3));
        let grads = finite_diff_gradient(&mut store, 1e-5, |_| 42.0);
        assert!(grads[0].1.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn finite_diff_sum_of_squares() {
        let mut store = ParamStore::new();
        store.insert("w", Matrix::from_vec(1, 4, vec![0.5, -1.5, 2.0, 0.1]));
        let grads = finite_diff_gradient(&mut store, 1e-5, |s| {
            s.get("w").unwrap().data().iter().map(|v| v * v).sum()
        });
        for (i, &w) in [0.5, -1.5, 2.0, 0.1].iter().enumerate() {
            assert!((grads[0].1.data()[i] - 2.0 * w).abs() < 1e-6);
        }
    }
}
