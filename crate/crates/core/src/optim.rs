//! Adam and plain SGD over flat parameter tensors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{Grads, NetParams};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "invalid Adam hyperparameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Moment accumulators, one flat vector per parameter tensor.
///
/// Update per entry, with `t` counted from 1:
/// `m ← β₁m + (1-β₁)g`, `v ← β₂v + (1-β₂)g²`,
/// `θ ← θ - lr · (m/(1-β₁ᵗ)) / (sqrt(v/(1-β₂ᵗ)) + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    /// Zeroed state for tensors of the given lengths.
    pub fn for_shapes(lens: &[usize], hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(AdamState {
            m: lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            hyper,
        })
    }

    pub fn new(params: &NetParams, hyper: AdamHyper) -> Result<Self> {
        let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self::for_shapes(&lens, hyper)
    }

    /// One step over matching tensor lists. A non-finite gradient refuses the
    /// step and leaves both state and parameters untouched.
    pub fn step_tensors(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let shapes_ok = params.len() == self.m.len()
            && grads.len() == self.m.len()
            && params
                .iter()
                .zip(grads)
                .zip(&self.m)
                .all(|((p, g), m)| p.len() == m.len() && g.len() == m.len());
        if !shapes_ok {
            return Err(Error::Validation(
                "Adam state, params and grads disagree in shape".into(),
            ));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric(
                "non-finite gradient, Adam step refused".into(),
            ));
        }
        let AdamHyper {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        self.t += 1;
        let bc1 = 1.0 - libm::pow(beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.t as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut NetParams, grads: &Grads) -> Result<()> {
        let g = grads.tensors();
        self.step_tensors(&mut params.tensors_mut(), &g)
    }
}

/// `θ ← θ - lr·g`.
pub fn sgd_step(params: &mut NetParams, grads: &Grads, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!(
            "sgd learning rate must be positive, got {lr}"
        )));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric(
            "non-finite gradient, SGD step refused".into(),
        ));
    }
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        for (pi, gi) in p.iter_mut().zip(g) {
            *pi -= lr * gi;
        }
    }
    Ok(())
}
