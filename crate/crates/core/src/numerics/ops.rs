//! Stable activations and the row kernels shared by the tape and by the
//! incremental (cached) inference path.
//!
//! Reduction order: every dot product and sum runs over its index in
//! ascending order starting from `0.0`. The tape and the cached decoder both
//! call these kernels, so the two paths produce bit-identical values.

use super::Tensor;
use crate::{Error, Result};

/// Numerically stable softmax over all entries of `logits`.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.ensure_finite("softmax")?;
    let mut out = logits.values().to_vec();
    softmax_in_place(&mut out);
    Tensor::new(logits.shape().to_vec(), out)
}

/// Elementwise logistic function.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    x.ensure_finite("sigmoid")?;
    let out = x.values().iter().map(|&z| sigmoid_scalar(z)).collect();
    Tensor::new(x.shape().to_vec(), out)
}

/// Elementwise `log(sigmoid(x))`, the log-domain companion of [`sigmoid`].
pub fn log_sigmoid(x: &Tensor) -> Result<Tensor> {
    x.ensure_finite("log_sigmoid")?;
    let out = x.values().iter().map(|&z| log_sigmoid_scalar(z)).collect();
    Tensor::new(x.shape().to_vec(), out)
}

/// `-log dist[gold]`.
pub fn cross_entropy(dist: &Tensor, gold: usize) -> Result<f64> {
    let p = *dist.values().get(gold).ok_or(Error::Index {
        index: gold,
        len: dist.len(),
    })?;
    let total: f64 = dist.values().iter().sum();
    if (total - 1.0).abs() > 1e-6 || dist.values().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidInput(format!(
            "cross_entropy expects a distribution (sum {total})"
        )));
    }
    // -ln(1) is -0.0; report +0.0.
    Ok((-p.ln()).max(0.0))
}

pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

pub fn log_softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &x in xs.iter() {
        sum += (x - max).exp();
    }
    let lse = max + sum.ln();
    for x in xs.iter_mut() {
        *x -= lse;
    }
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (e + 1.0)
    }
}

pub fn log_sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Binary cross-entropy of `sigmoid(z)` against target `y` in `[0, 1]`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    -(y * log_sigmoid_scalar(z) + (1.0 - y) * log_sigmoid_scalar(-z))
}

/// `out[m×n] = a[m×k] · b[k×n]`, overwriting `out`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out[m×n] += a[m×k] · b[n×k]ᵀ`.
pub fn matmul_bt_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                s += x * y;
            }
            out[i * n + j] += s;
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`.
pub fn matmul_at_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Normalizes one row; writes the normalized-but-unscaled row to `xhat` and
/// returns `1/std`.
pub fn layer_norm_row(
    x: &[f64],
    gain: &[f64],
    bias: &[f64],
    xhat: &mut [f64],
    out: &mut [f64],
) -> f64 {
    let n = x.len() as f64;
    let mut mean = 0.0;
    for &v in x {
        mean += v;
    }
    mean /= n;
    let mut var = 0.0;
    for &v in x {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * inv_std;
        out[i] = xhat[i] * gain[i] + bias[i];
    }
    inv_std
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Causal attention for one query row against `n_keys` cached rows.
///
/// `qkv_rows` holds rows of width `3·d` laid out `[q | k | v]`; row `u` of the
/// keys/values lives at `qkv_rows[u*3d..]`. Writes the head-concatenated
/// output to `out` and the per-head attention weights to `probs`
/// (`heads × n_keys`).
pub fn attention_row(
    q: &[f64],
    qkv_rows: &[f64],
    n_keys: usize,
    heads: usize,
    out: &mut [f64],
    probs: &mut [f64],
) {
    let d = q.len();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let stride = 3 * d;
    out.fill(0.0);
    for h in 0..heads {
        let qh = &q[h * dh..(h + 1) * dh];
        let p = &mut probs[h * n_keys..(h + 1) * n_keys];
        for (u, pu) in p.iter_mut().enumerate() {
            let kh = &qkv_rows[u * stride + d + h * dh..u * stride + d + (h + 1) * dh];
            let mut s = 0.0;
            for (a, b) in qh.iter().zip(kh) {
                s += a * b;
            }
            *pu = s * scale;
        }
        softmax_in_place(p);
        let oh = &mut out[h * dh..(h + 1) * dh];
        for (u, &pu) in p.iter().enumerate() {
            let vh = &qkv_rows[u * stride + 2 * d + h * dh..u * stride + 2 * d + (h + 1) * dh];
            for (o, &v) in oh.iter_mut().zip(vh) {
                *o += pu * v;
            }
        }
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    // Lowest index wins ties.
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
