//! Network building blocks with hand-written forward/backward passes.
//!
//! All math runs in f64: the gradient-check contract (analytic vs central
//! finite differences within 1e-4 relative error) is not reliably
//! satisfiable in f32. Activations use NCHW layout; convolution lowers to
//! a single matrix product per batch via im2col.
//!
//! Every layer exposes `forward_train` (caches what backward needs) and
//! `infer` (&self, cache-free), so prediction on a frozen model stays
//! safe for concurrent callers.

use ndarray::{Array1, Array2, Array4, ArrayD, Axis, IxDyn};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A learnable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: ArrayD<f64>,
    pub grad: ArrayD<f64>,
}

impl Param {
    pub fn new(value: ArrayD<f64>) -> Self {
        let grad = ArrayD::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Param::new(ArrayD::zeros(IxDyn(shape)))
    }

    /// He-style init: Normal(0, sqrt(2 / fan_in)).
    pub fn he_normal(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("finite std");
        let value = ArrayD::from_shape_simple_fn(IxDyn(shape), || dist.sample(rng));
        Param::new(value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Output side length of a convolution: floor((in + 2p - k) / s) + 1.
pub fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (size + 2 * pad - k) / stride + 1
}

/// Lowers (N, C, H, W) to a (C*k*k, N*oh*ow) matrix; out-of-bounds taps
/// from padding contribute zeros.
fn im2col(
    x: &Array4<f64>,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array2<f64> {
    let (n, c, h, w) = x.dim();
    let mut col = Array2::<f64>::zeros((c * k * k, n * oh * ow));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ci * k * k + ki * k + kj;
                let mut col_row = col.row_mut(row);
                for ni in 0..n {
                    for oi in 0..oh {
                        let ii = (oi * stride + ki) as isize - pad as isize;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        for oj in 0..ow {
                            let jj = (oj * stride + kj) as isize - pad as isize;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            col_row[ni * oh * ow + oi * ow + oj] =
                                x[[ni, ci, ii as usize, jj as usize]];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input
/// grid, accumulating where taps overlap.
fn col2im(
    dcol: &Array2<f64>,
    dims: (usize, usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array4<f64> {
    let (n, c, h, w) = dims;
    let mut dx = Array4::<f64>::zeros((n, c, h, w));
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ci * k * k + ki * k + kj;
                let dcol_row = dcol.row(row);
                for ni in 0..n {
                    for oi in 0..oh {
                        let ii = (oi * stride + ki) as isize - pad as isize;
                        if ii < 0 || ii >= h as isize {
                            continue;
                        }
                        for oj in 0..ow {
                            let jj = (oj * stride + kj) as isize - pad as isize;
                            if jj < 0 || jj >= w as isize {
                                continue;
                            }
                            dx[[ni, ci, ii as usize, jj as usize]] +=
                                dcol_row[ni * oh * ow + oi * ow + oj];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// 2D convolution, square kernel, symmetric zero padding.
#[derive(Debug, Clone)]
pub struct Conv2d {
    /// Kernel stored GEMM-ready as (out_c, in_c * k * k).
    pub weight: Param,
    pub bias: Option<Param>,
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    cache_x: Option<Array4<f64>>,
}

impl Conv2d {
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_c * k * k;
        Conv2d {
            weight: Param::he_normal(&[out_c, fan_in], fan_in, rng),
            bias: bias.then(|| Param::zeros(&[out_c])),
            in_c,
            out_c,
            k,
            stride,
            pad,
            cache_x: None,
        }
    }

    fn compute(&self, x: &Array4<f64>) -> Array4<f64> {
        let (n, c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_c);
        let oh = conv_out(h, self.k, self.stride, self.pad);
        let ow = conv_out(w, self.k, self.stride, self.pad);
        let col = im2col(x, self.k, self.stride, self.pad, oh, ow);
        let w2 = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap();
        let out_mat = w2.dot(&col); // (out_c, n*oh*ow)
        let mut y = Array4::<f64>::zeros((n, self.out_c, oh, ow));
        for oc in 0..self.out_c {
            let b = self.bias.as_ref().map(|p| p.value[[oc]]).unwrap_or(0.0);
            let row = out_mat.row(oc);
            for ni in 0..n {
                for oi in 0..oh {
                    for oj in 0..ow {
                        y[[ni, oc, oi, oj]] = row[ni * oh * ow + oi * ow + oj] + b;
                    }
                }
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> Array4<f64> {
        self.cache_x = Some(x.clone());
        self.compute(x)
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        self.compute(x)
    }

    pub fn backward(&mut self, dy: &Array4<f64>) -> Array4<f64> {
        let x = self.cache_x.take().expect("forward_train before backward");
        let (n, _, h, w) = x.dim();
        let (_, _, oh, ow) = dy.dim();
        // dy as (out_c, n*oh*ow)
        let mut dy_mat = Array2::<f64>::zeros((self.out_c, n * oh * ow));
        for ni in 0..n {
            for oc in 0..self.out_c {
                for oi in 0..oh {
                    for oj in 0..ow {
                        dy_mat[[oc, ni * oh * ow + oi * ow + oj]] = dy[[ni, oc, oi, oj]];
                    }
                }
            }
        }
        let col = im2col(&x, self.k, self.stride, self.pad, oh, ow);
        let dw = dy_mat.dot(&col.t()); // (out_c, in_c*k*k)
        self.weight.grad += &dw.into_dyn();
        if let Some(bias) = &mut self.bias {
            let db = dy_mat.sum_axis(Axis(1));
            bias.grad += &db.into_dyn();
        }
        let w2 = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap();
        let dcol = w2.t().dot(&dy_mat);
        col2im(
            &dcol,
            (n, self.in_c, h, w),
            self.k,
            self.stride,
            self.pad,
            oh,
            ow,
        )
    }
}

/// Fully connected layer on (N, F) activations.
#[derive(Debug, Clone)]
pub struct Dense {
    /// (out_features, in_features)
    pub weight: Param,
    pub bias: Param,
    cache_x: Option<Array2<f64>>,
}

impl Dense {
    pub fn new(in_f: usize, out_f: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: Param::he_normal(&[out_f, in_f], in_f, rng),
            bias: Param::zeros(&[out_f]),
            cache_x: None,
        }
    }

    fn compute(&self, x: &Array2<f64>) -> Array2<f64> {
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap();
        let b = self
            .bias
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .unwrap();
        x.dot(&w.t()) + b
    }

    pub fn forward_train(&mut self, x: &Array2<f64>) -> Array2<f64> {
        self.cache_x = Some(x.clone());
        self.compute(x)
    }

    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        self.compute(x)
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let x = self.cache_x.take().expect("forward_train before backward");
        self.weight.grad += &dy.t().dot(&x).into_dyn();
        self.bias.grad += &dy.sum_axis(Axis(0)).into_dyn();
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .unwrap();
        dy.dot(&w)
    }
}

/// Per-channel batch normalization over (N, H, W).
///
/// Training normalizes with batch statistics and maintains running
/// estimates (momentum 0.1, biased variance); inference normalizes with
/// the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    momentum: f64,
    eps: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Array4<f64>,
    inv_std: Array1<f64>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(ArrayD::ones(IxDyn(&[channels]))),
            beta: Param::zeros(&[channels]),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let (n, c, h, w) = x.dim();
        let m = (n * h * w) as f64;
        let mut y = Array4::<f64>::zeros((n, c, h, w));
        let mut xhat = Array4::<f64>::zeros((n, c, h, w));
        let mut inv_std = Array1::<f64>::zeros(c);
        for ci in 0..c {
            let ch = x.index_axis(Axis(1), ci);
            let mean = ch.sum() / m;
            let var = ch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ci] = is;
            let g = self.gamma.value[[ci]];
            let b = self.beta.value[[ci]];
            for ni in 0..n {
                for i in 0..h {
                    for j in 0..w {
                        let xh = (x[[ni, ci, i, j]] - mean) * is;
                        xhat[[ni, ci, i, j]] = xh;
                        y[[ni, ci, i, j]] = g * xh + b;
                    }
                }
            }
            self.running_mean[ci] =
                (1.0 - self.momentum) * self.running_mean[ci] + self.momentum * mean;
            self.running_var[ci] =
                (1.0 - self.momentum) * self.running_var[ci] + self.momentum * var;
        }
        self.cache = Some(BnCache { xhat, inv_std });
        y
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        let (n, c, h, w) = x.dim();
        let mut y = Array4::<f64>::zeros((n, c, h, w));
        for ci in 0..c {
            let is = 1.0 / (self.running_var[ci] + self.eps).sqrt();
            let mean = self.running_mean[ci];
            let g = self.gamma.value[[ci]];
            let b = self.beta.value[[ci]];
            for ni in 0..n {
                for i in 0..h {
                    for j in 0..w {
                        y[[ni, ci, i, j]] = g * (x[[ni, ci, i, j]] - mean) * is + b;
                    }
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Array4<f64>) -> Array4<f64> {
        let BnCache { xhat, inv_std } = self.cache.take().expect("forward_train before backward");
        let (n, c, h, w) = dy.dim();
        let m = (n * h * w) as f64;
        let mut dx = Array4::<f64>::zeros((n, c, h, w));
        for ci in 0..c {
            let g = self.gamma.value[[ci]];
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for ni in 0..n {
                for i in 0..h {
                    for j in 0..w {
                        let d = dy[[ni, ci, i, j]];
                        sum_dy += d;
                        sum_dy_xhat += d * xhat[[ni, ci, i, j]];
                    }
                }
            }
            self.gamma.grad[[ci]] += sum_dy_xhat;
            self.beta.grad[[ci]] += sum_dy;
            // dx = (g * inv_std / m) * (m*dy - sum_dy - xhat * sum_dy_xhat)
            let scale = g * inv_std[ci] / m;
            for ni in 0..n {
                for i in 0..h {
                    for j in 0..w {
                        dx[[ni, ci, i, j]] = scale
                            * (m * dy[[ni, ci, i, j]]
                                - sum_dy
                                - xhat[[ni, ci, i, j]] * sum_dy_xhat);
                    }
                }
            }
        }
        dx
    }
}

/// Elementwise max(x, 0).
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Array4<f64>>,
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let y = x * &mask;
        self.mask = Some(mask);
        y
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        x.mapv(|v| v.max(0.0))
    }

    pub fn backward(&mut self, dy: &Array4<f64>) -> Array4<f64> {
        let mask = self.mask.take().expect("forward_train before backward");
        dy * &mask
    }
}

/// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
/// Ties resolve to the first maximum in scan order.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    cache: Option<(Vec<(usize, usize)>, (usize, usize, usize, usize))>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        MaxPool2::default()
    }

    fn compute(&self, x: &Array4<f64>) -> (Array4<f64>, Vec<(usize, usize)>) {
        let (n, c, h, w) = x.dim();
        let (oh, ow) = (h / 2, w / 2);
        let mut y = Array4::<f64>::zeros((n, c, oh, ow));
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for ni in 0..n {
            for ci in 0..c {
                for oi in 0..oh {
                    for oj in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = (0, 0);
                        for di in 0..2 {
                            for dj in 0..2 {
                                let (i, j) = (oi * 2 + di, oj * 2 + dj);
                                let v = x[[ni, ci, i, j]];
                                if v > best {
                                    best = v;
                                    at = (i, j);
                                }
                            }
                        }
                        y[[ni, ci, oi, oj]] = best;
                        argmax.push(at);
                    }
                }
            }
        }
        (y, argmax)
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> Array4<f64> {
        let (y, argmax) = self.compute(x);
        self.cache = Some((argmax, x.dim()));
        y
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        self.compute(x).0
    }

    pub fn backward(&mut self, dy: &Array4<f64>) -> Array4<f64> {
        let (argmax, dims) = self.cache.take().expect("forward_train before backward");
        let (n, c, oh, ow) = dy.dim();
        let mut dx = Array4::<f64>::zeros(dims);
        let mut idx = 0;
        for ni in 0..n {
            for ci in 0..c {
                for oi in 0..oh {
                    for oj in 0..ow {
                        let (i, j) = argmax[idx];
                        dx[[ni, ci, i, j]] += dy[[ni, ci, oi, oj]];
                        idx += 1;
                    }
                }
            }
        }
        dx
    }
}

/// Mean over the spatial grid: (N, C, H, W) -> (N, C).
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    cache_hw: Option<(usize, usize)>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool::default()
    }

    fn compute(x: &Array4<f64>) -> Array2<f64> {
        let (n, c, h, w) = x.dim();
        let mut y = Array2::<f64>::zeros((n, c));
        let m = (h * w) as f64;
        for ni in 0..n {
            for ci in 0..c {
                y[[ni, ci]] = x.index_axis(Axis(0), ni).index_axis(Axis(0), ci).sum() / m;
            }
        }
        y
    }

    pub fn forward_train(&mut self, x: &Array4<f64>) -> Array2<f64> {
        let (_, _, h, w) = x.dim();
        self.cache_hw = Some((h, w));
        Self::compute(x)
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array2<f64> {
        Self::compute(x)
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Array4<f64> {
        let (h, w) = self.cache_hw.take().expect("forward_train before backward");
        let (n, c) = dy.dim();
        let m = (h * w) as f64;
        Array4::from_shape_fn((n, c, h, w), |(ni, ci, _, _)| dy[[ni, ci]] / m)
    }
}

/// Row-wise softmax with the usual max-shift for stability.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Mean cross-entropy over the batch plus its gradient w.r.t. the logits.
/// Labels are 0-based class indices.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows();
    debug_assert_eq!(n, labels.len());
    let probs = softmax(logits);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        loss -= probs[[i, label]].max(1e-300).ln();
    }
    loss /= n as f64;
    let mut dlogits = probs;
    for (i, &label) in labels.iter().enumerate() {
        dlogits[[i, label]] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v / n as f64);
    (loss, dlogits)
}
