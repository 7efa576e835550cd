//! Weighted empirical distributions, the two-sample Kolmogorov–Smirnov
//! distance, the sim/real agreement gate and accuracy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::validate_weights;
use crate::error::{Error, Result};

/// Agreement gate: the KS distance must stay strictly below this.
pub const DEFAULT_KS_THRESHOLD: f64 = 0.09;

/// Scores with non-negative weights (unit weights by default).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    scores: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl WeightedSample {
    pub fn new(scores: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Validation("non-finite score".into()));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != scores.len() {
                    return Err(Error::Validation(format!(
                        "{} scores but {} weights",
                        scores.len(),
                        w.len()
                    )));
                }
                validate_weights(&w)?;
                w
            }
            None => vec![1.0; scores.len()],
        };
        let total = weights.iter().sum();
        Ok(WeightedSample {
            scores,
            weights,
            total,
        })
    }

    pub fn unweighted(scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, None)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// `(score, weight)` pairs sorted by score.
    fn sorted(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self
            .scores
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }
}

/// `F(x)`: weight of scores `<= x` over total weight. Right-continuous.
pub fn weighted_ecdf(s: &WeightedSample, x: f64) -> f64 {
    let below: f64 = s
        .scores
        .iter()
        .zip(&s.weights)
        .filter(|(v, _)| **v <= x)
        .map(|(_, w)| w)
        .sum();
    below / s.total
}

/// `sup_x |F_a(x) - F_b(x)|`, evaluated at every distinct pooled score.
///
/// Both ECDFs are step functions that only jump at sample points, so the
/// supremum over the pooled points is exact.
pub fn ks_distance(a: &WeightedSample, b: &WeightedSample) -> Result<f64> {
    if !(a.total > 0.0 && b.total > 0.0) {
        return Err(Error::Validation("sample with zero total weight".into()));
    }
    let sa = a.sorted();
    let sb = b.sorted();
    let (mut i, mut j) = (0, 0);
    let (mut ca, mut cb) = (0.0, 0.0);
    let mut best: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        let next = match (sa.get(i), sb.get(j)) {
            (Some(x), Some(y)) => x.0.min(y.0),
            (Some(x), None) => x.0,
            (None, Some(y)) => y.0,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i].0 <= next {
            ca += sa[i].1;
            i += 1;
        }
        while j < sb.len() && sb[j].0 <= next {
            cb += sb[j].1;
            j += 1;
        }
        best = best.max((ca / a.total - cb / b.total).abs());
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Outcome of the agreement gate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KsReport {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_source: usize,
    pub n_target: usize,
}

/// KS distance between the model's scores on the source and target samples.
/// Passes only when the statistic is strictly below `threshold`.
pub fn agreement_check(
    source: &WeightedSample,
    target: &WeightedSample,
    threshold: f64,
) -> Result<KsReport> {
    if !threshold.is_finite() {
        return Err(Error::Config(format!(
            "threshold must be finite, got {threshold}"
        )));
    }
    let statistic = ks_distance(source, target)?;
    Ok(KsReport {
        statistic,
        threshold,
        pass: statistic < threshold,
        n_source: source.len(),
        n_target: target.len(),
    })
}

/// Fraction of rows where `(prob >= cut)` matches the label. A probability
/// exactly at the cut predicts class 1.
pub fn accuracy(probs: &[f64], labels: &[u8], cut: f64) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Shape {
            op: "accuracy",
            left: (probs.len(), 1),
            right: (labels.len(), 1),
        });
    }
    if probs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= cut) == (y == 1))
        .count();
    Ok(hits as f64 / probs.len() as f64)
}

/// Weighted density histogram on `bins` equal-width bins over `[lo, hi]`.
///
/// Bins are half-open except the last, which includes `hi`; scores outside
/// the range fall into the nearest edge bin. Densities integrate to 1.
pub fn density_histogram(s: &WeightedSample, bins: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if bins == 0 || lo.partial_cmp(&hi) != Some(core::cmp::Ordering::Less) {
        return Err(Error::Config(format!(
            "bad histogram range [{lo}, {hi}] with {bins} bins"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut acc = vec![0.0; bins];
    for (&x, &w) in s.scores.iter().zip(&s.weights) {
        let k = libm::floor((x - lo) / width);
        let k = if k < 0.0 {
            0
        } else {
            (k as usize).min(bins - 1)
        };
        acc[k] += w;
    }
    Ok(acc.into_iter().map(|w| w / (s.total * width)).collect())
}
