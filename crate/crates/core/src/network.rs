//! Two-headed feedforward classifier.
//!
//! A shared tanh hidden layer feeds a two-way softmax class head and, through
//! a gradient reversal layer, a two-way softmax domain head. Column `k` of a
//! head's weight matrix produces the logit of class index `k`, so for the
//! class head column 1 is "signal" and for the domain head column 1 is
//! "target".

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before `ln`.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitRule {
    /// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    #[default]
    GlorotUniform,
}

/// All learnable weights. Shapes: `w1` d×h, `b1` h, `wc`/`wd` h×2, `bc`/`bd` 2.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub wc: Matrix,
    pub bc: Vec<f64>,
    pub wd: Matrix,
    pub bd: Vec<f64>,
}

impl NetParams {
    pub fn zeros(d: usize, h: usize) -> Self {
        NetParams {
            w1: Matrix::zeros(d, h),
            b1: vec![0.0; h],
            wc: Matrix::zeros(h, 2),
            bc: vec![0.0; 2],
            wd: Matrix::zeros(h, 2),
            bd: vec![0.0; 2],
        }
    }

    /// Draws `w1`, then `wc`, then `wd` from `rng`.
    pub fn init(d: usize, h: usize, rng: &mut Rng, rule: InitRule) -> Result<Self> {
        if d == 0 || h == 0 {
            return Err(Error::Config(
                "input and hidden widths must be at least 1".into(),
            ));
        }
        let mut p = NetParams::zeros(d, h);
        match rule {
            InitRule::GlorotUniform => {
                for (m, fan_in, fan_out) in
                    [(&mut p.w1, d, h), (&mut p.wc, h, 2), (&mut p.wd, h, 2)]
                {
                    let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                    m.data_mut()
                        .iter_mut()
                        .for_each(|v| *v = rng.uniform_range(-a, a));
                }
            }
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let ok = self.b1.len() == h
            && self.wc.shape() == (h, 2)
            && self.bc.len() == 2
            && self.wd.shape() == (h, 2)
            && self.bd.len() == 2;
        if !ok {
            return Err(Error::Validation("inconsistent parameter shapes".into()));
        }
        if self
            .tensors()
            .iter()
            .any(|t| t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Validation("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Flat views in the fixed order `w1, b1, wc, bc, wd, bd`.
    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w1.data(),
            &self.b1,
            self.wc.data(),
            &self.bc,
            self.wd.data(),
            &self.bd,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.data_mut(),
            &mut self.b1,
            self.wc.data_mut(),
            &mut self.bc,
            self.wd.data_mut(),
            &mut self.bd,
        ]
    }

    /// Hidden activations `tanh(X·W1 + b1)`.
    pub fn hidden_layer(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                op: "forward",
                left: x.shape(),
                right: self.w1.shape(),
            });
        }
        let mut h = x.matmul(&self.w1)?;
        for r in 0..h.rows() {
            for (v, &b) in h.row_mut(r).iter_mut().zip(&self.b1) {
                *v = tanh(*v + b);
            }
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardTrace> {
        let hidden = self.hidden_layer(x)?;
        let class_probs = head_probs(&hidden, &self.wc, &self.bc)?;
        let domain_probs = head_probs(&hidden, &self.wd, &self.bd)?;
        Ok(ForwardTrace {
            hidden,
            class_probs,
            domain_probs,
        })
    }

    /// Class-1 probability per row.
    pub fn signal_probability(&self, x: &Matrix) -> Result<Vec<f64>> {
        let hidden = self.hidden_layer(x)?;
        Ok(head_probs(&hidden, &self.wc, &self.bc)?.column(1))
    }

    /// Gradients of `class_loss + domain_loss`, with the domain branch's
    /// contribution to `w1`/`b1` passed through [`grl`].
    ///
    /// The class and domain batches may hold different rows. A head whose
    /// batch is absent gets exactly zero gradient.
    pub fn backward(
        &self,
        class: Option<&LabeledBatch<'_>>,
        domain: Option<&LabeledBatch<'_>>,
        lambda: f64,
    ) -> Result<(Grads, Losses)> {
        if class.is_none() && domain.is_none() {
            return Err(Error::Contract(
                "backward needs a class batch, a domain batch, or both".into(),
            ));
        }
        let mut g = Grads::zeros_like(self);
        let mut losses = Losses::default();

        if let Some(batch) = class {
            let hidden = self.hidden_layer(batch.x)?;
            let probs = head_probs(&hidden, &self.wc, &self.bc)?;
            let (loss, delta) = softmax_xent_grad(&probs, batch.labels, batch.weights)?;
            losses.class = Some(loss);
            g.wc = delta.t_matmul(&hidden)?.transpose();
            g.bc = delta.column_sums();
            let d_hidden = delta.matmul(&self.wc.transpose())?;
            self.accumulate_feature_grads(&mut g, batch.x, &hidden, &d_hidden)?;
        }

        if let Some(batch) = domain {
            let hidden = self.hidden_layer(batch.x)?;
            let probs = head_probs(&hidden, &self.wd, &self.bd)?;
            let (loss, delta) = softmax_xent_grad(&probs, batch.labels, batch.weights)?;
            losses.domain = Some(loss);
            g.wd = delta.t_matmul(&hidden)?.transpose();
            g.bd = delta.column_sums();
            let d_hidden = grl(&delta.matmul(&self.wd.transpose())?, lambda);
            self.accumulate_feature_grads(&mut g, batch.x, &hidden, &d_hidden)?;
        }
        Ok((g, losses))
    }

    fn accumulate_feature_grads(
        &self,
        g: &mut Grads,
        x: &Matrix,
        hidden: &Matrix,
        d_hidden: &Matrix,
    ) -> Result<()> {
        let mut d_pre = d_hidden.clone();
        for (g, &a) in d_pre.data_mut().iter_mut().zip(hidden.data()) {
            *g *= 1.0 - a * a;
        }
        g.w1 = g.w1.add(&x.t_matmul(&d_pre)?)?;
        for (acc, s) in g.b1.iter_mut().zip(d_pre.column_sums()) {
            *acc += s;
        }
        Ok(())
    }
}

/// Rows, labels and optional weights for one head.
#[derive(Debug, Clone, Copy)]
pub struct LabeledBatch<'a> {
    pub x: &'a Matrix,
    pub labels: &'a [u8],
    pub weights: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Losses {
    pub class: Option<f64>,
    pub domain: Option<f64>,
}

impl Losses {
    pub fn total(&self) -> f64 {
        self.class.unwrap_or(0.0) + self.domain.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden: Matrix,
    pub class_probs: Matrix,
    pub domain_probs: Matrix,
}

/// Gradient with the same layout as [`NetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(NetParams);

impl Grads {
    pub fn zeros_like(p: &NetParams) -> Self {
        Grads(NetParams::zeros(p.input_dim(), p.hidden()))
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl Deref for Grads {
    type Target = NetParams;
    fn deref(&self) -> &NetParams {
        &self.0
    }
}

impl DerefMut for Grads {
    fn deref_mut(&mut self) -> &mut NetParams {
        &mut self.0
    }
}

/// `tanh` through a single `exp`; absolute error stays within a few ulp of 1.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let e = libm::exp(-2.0 * x.abs());
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// Forward pass of the gradient reversal layer: the identity.
pub fn grl_forward(x: &Matrix) -> Matrix {
    x.clone()
}

/// Backward pass of the gradient reversal layer: `-lambda · upstream`.
pub fn grl(upstream: &Matrix, lambda: f64) -> Matrix {
    upstream.map(|g| -lambda * g)
}

/// `softmax(hidden · w + b)`, computed against `wᵀ` so the inner loop runs
/// over the hidden width.
fn head_probs(hidden: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    Ok(softmax_rows(&hidden.matmul_t(&w.transpose())?.add_row(b)?))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Per-row weights normalized to sum 1; uniform when absent.
pub fn normalized_weights(n: usize, weights: Option<&[f64]>) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0 / n as f64; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::Shape {
                    op: "weights",
                    left: (n, 1),
                    right: (w.len(), 1),
                });
            }
            crate::dataset::validate_weights(w)?;
            let total: f64 = w.iter().sum();
            Ok(w.iter().map(|v| v / total).collect())
        }
    }
}

fn check_labels(probs: &Matrix, labels: &[u8]) -> Result<()> {
    if probs.rows() != labels.len() {
        return Err(Error::Shape {
            op: "cross_entropy",
            left: probs.shape(),
            right: (labels.len(), 1),
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Validation("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Weighted mean of `-ln p(true class)` with clamped probabilities.
pub fn cross_entropy(probs: &Matrix, labels: &[u8], weights: Option<&[f64]>) -> Result<f64> {
    check_labels(probs, labels)?;
    let w = normalized_weights(labels.len(), weights)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -w[i] * libm::log(clamp_prob(probs.get(i, y as usize))))
        .sum())
}

/// Cross-entropy of the class head on `trace`.
pub fn class_loss(trace: &ForwardTrace, labels: &[u8], weights: Option<&[f64]>) -> Result<f64> {
    cross_entropy(&trace.class_probs, labels, weights)
}

/// Cross-entropy of the domain head on `trace`.
pub fn domain_loss(trace: &ForwardTrace, labels: &[u8], weights: Option<&[f64]>) -> Result<f64> {
    cross_entropy(&trace.domain_probs, labels, weights)
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Loss and its gradient with respect to the logits.
///
/// Rows whose true-class probability sits in the clamped region contribute
/// zero gradient, which is the exact derivative of the clamped loss.
fn softmax_xent_grad(
    probs: &Matrix,
    labels: &[u8],
    weights: Option<&[f64]>,
) -> Result<(f64, Matrix)> {
    check_labels(probs, labels)?;
    let w = normalized_weights(labels.len(), weights)?;
    let mut loss = 0.0;
    let mut delta = Matrix::zeros(probs.rows(), probs.cols());
    for (i, &y) in labels.iter().enumerate() {
        let p_true = probs.get(i, y as usize);
        loss -= w[i] * libm::log(clamp_prob(p_true));
        if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p_true) {
            for (k, d) in delta.row_mut(i).iter_mut().enumerate() {
                let target = if k == y as usize { 1.0 } else { 0.0 };
                *d = w[i] * (probs.get(i, k) - target);
            }
        }
    }
    Ok((loss, delta))
}
