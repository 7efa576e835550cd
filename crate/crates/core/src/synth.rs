//! Synthetic sim/real scenarios with a known kind of dataset shift.
//!
//! Features come from a two-component Gaussian mixture with unit covariance
//! and component means `±a·e₀`. Labels are drawn from one logistic rule,
//! `y ~ Bernoulli(σ(w·x))` with `w = 2a·e₀`, which is the exact posterior of
//! the balanced mixture. The control channel uses the same machinery with the
//! mixture axis rotated out of the `e₀` direction and carries no labels.
//!
//! Shift kinds, applied to the target side only:
//!
//! - `covariate_shift`: target features (process and control alike) go through
//!   an affine map along `u = (e₀ + e₁)/√2`: the `u` component is scaled by
//!   `1 + 0.1·m` and translated by `m`. Labels use the unchanged rule.
//! - `prior_shift`: target features come from the source sampler and are
//!   resampled to exactly `round(n·target_signal_fraction)` signal rows.
//! - `concept_shift`: target features come from the source sampler, but the
//!   rule is inverted for rows with `x₁ > 1/m`.
//! - `none`: target is a fresh draw from the source sampler.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Dataset, Domain, Schema};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Half-distance `a` between the two mixture components.
pub const CLASS_SEPARATION: f64 = 1.5;
/// Rotation of the control mixture axis away from `e₀`, in radians.
pub const CONTROL_ROTATION: f64 = core::f64::consts::FRAC_PI_3;
/// Angle between the shift direction and the class axis `e₀`, in radians.
pub const SHIFT_ANGLE: f64 = core::f64::consts::FRAC_PI_3;
/// Scale growth of the shifted component per unit of magnitude.
pub const SCALE_PER_MAGNITUDE: f64 = 0.1;
/// Control-target weights are Gamma(shape, scale): mean 1, sPlot-like skew.
pub const WEIGHT_GAMMA_SHAPE: u32 = 4;
pub const WEIGHT_GAMMA_SCALE: f64 = 0.25;

pub const LABEL_COLUMN: &str = "signal";
pub const WEIGHT_COLUMN: &str = "weight";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ShiftKind {
    PriorShift,
    CovariateShift,
    ConceptShift,
    None,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ScenarioConfig {
    pub kind: ShiftKind,
    pub d: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub n_control_source: usize,
    pub n_control_target: usize,
    pub shift_magnitude: f64,
    pub source_signal_fraction: f64,
    pub target_signal_fraction: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: ShiftKind::CovariateShift,
            d: 10,
            n_source: 5000,
            n_target: 5000,
            n_control_source: 2000,
            n_control_target: 2000,
            shift_magnitude: 1.0,
            source_signal_fraction: 0.5,
            target_signal_fraction: 0.5,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config(format!(
                "d must be at least 2, got {}",
                self.d
            )));
        }
        for (name, n) in [
            ("n_source", self.n_source),
            ("n_target", self.n_target),
            ("n_control_source", self.n_control_source),
            ("n_control_target", self.n_control_target),
        ] {
            if n < 2 {
                return Err(Error::Config(format!("{name} must be at least 2, got {n}")));
            }
        }
        if !(self.shift_magnitude >= 0.0 && self.shift_magnitude.is_finite()) {
            return Err(Error::Config(format!(
                "shift_magnitude must be finite and >= 0, got {}",
                self.shift_magnitude
            )));
        }
        for (name, f) in [
            ("source_signal_fraction", self.source_signal_fraction),
            ("target_signal_fraction", self.target_signal_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        Ok(())
    }

    /// Magnitude actually used; `none` ignores the configured value.
    pub fn effective_magnitude(&self) -> f64 {
        match self.kind {
            ShiftKind::None => 0.0,
            _ => self.shift_magnitude,
        }
    }
}

/// `x ← x + ((scale - 1)(u·x) + offset) u` for a unit vector `u`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainTransform {
    pub direction: Vec<f64>,
    pub offset: f64,
    pub scale: f64,
}

impl DomainTransform {
    pub fn identity(d: usize) -> Self {
        DomainTransform {
            direction: shift_direction(d),
            offset: 0.0,
            scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.offset == 0.0 && self.scale == 1.0
    }

    pub fn apply(&self, x: &mut [f64]) {
        if self.is_identity() {
            return;
        }
        let c: f64 = x.iter().zip(&self.direction).map(|(a, b)| a * b).sum();
        let step = (self.scale - 1.0) * c + self.offset;
        for (xi, ui) in x.iter_mut().zip(&self.direction) {
            *xi += step * ui;
        }
    }
}

/// Ground truth recorded next to the generated data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioTruth {
    pub config: ScenarioConfig,
    /// `w` in `P(y = 1 | x) = σ(w·x)`, shared by both domains except where
    /// concept shift inverts it.
    pub label_weights: Vec<f64>,
    pub class_mean: Vec<f64>,
    pub control_class_mean: Vec<f64>,
    pub process_transform: DomainTransform,
    pub control_transform: DomainTransform,
    /// Rows with `x₁` above this get the inverted rule (concept shift only).
    pub concept_flip_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    /// Labeled simulation of the process of interest.
    pub source: Dataset,
    /// Real data of the process of interest. Its labels exist for scoring
    /// only and must not reach training.
    pub target: Dataset,
    pub control_source: Dataset,
    /// Weighted, like sPlot-weighted real data.
    pub control_target: Dataset,
    pub truth: ScenarioTruth,
}

/// Feature names `f0..f{d-1}`.
pub fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

/// Schema of the generated process files (with label column).
pub fn process_schema(d: usize) -> Schema {
    Schema::new(feature_names(d)).with_label(LABEL_COLUMN)
}

/// Schema of the generated control-target file (with weight column).
pub fn control_target_schema(d: usize) -> Schema {
    Schema::new(feature_names(d)).with_weight(WEIGHT_COLUMN)
}

fn shift_direction(d: usize) -> Vec<f64> {
    let mut u = vec![0.0; d];
    u[0] = libm::cos(SHIFT_ANGLE);
    u[1] = libm::sin(SHIFT_ANGLE);
    u
}

fn class_mean(d: usize) -> Vec<f64> {
    let mut mu = vec![0.0; d];
    mu[0] = CLASS_SEPARATION;
    mu
}

fn control_class_mean(d: usize) -> Vec<f64> {
    let mut mu = vec![0.0; d];
    let axis = if d >= 3 { 2 } else { 1 };
    mu[0] = CLASS_SEPARATION * libm::cos(CONTROL_ROTATION);
    mu[axis] = CLASS_SEPARATION * libm::sin(CONTROL_ROTATION);
    mu
}

/// `σ(w·x)`.
pub fn label_probability(w: &[f64], x: &[f64]) -> f64 {
    let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    1.0 / (1.0 + libm::exp(-z))
}

/// One feature row: pick a component, add unit Gaussian noise.
fn draw_mixture(rng: &mut Rng, mean: &[f64], signal_fraction: f64, out: &mut [f64]) {
    let sign = if rng.bernoulli(signal_fraction) {
        1.0
    } else {
        -1.0
    };
    for (o, m) in out.iter_mut().zip(mean) {
        *o = sign * m + rng.normal();
    }
}

struct Sampler<'a> {
    mean: &'a [f64],
    signal_fraction: f64,
    transform: &'a DomainTransform,
}

impl Sampler<'_> {
    fn features(&self, rng: &mut Rng, n: usize, d: usize) -> Matrix {
        let mut x = Matrix::zeros(n, d);
        for r in 0..n {
            let row = x.row_mut(r);
            draw_mixture(rng, self.mean, self.signal_fraction, row);
            self.transform.apply(row);
        }
        x
    }

    fn labeled(&self, rng: &mut Rng, n: usize, d: usize, w: &[f64]) -> (Matrix, Vec<u8>) {
        let x = self.features(rng, n, d);
        let y = (0..n)
            .map(|r| rng.bernoulli(label_probability(w, x.row(r))) as u8)
            .collect();
        (x, y)
    }
}

pub fn generate(cfg: &ScenarioConfig) -> Result<ScenarioBundle> {
    cfg.validate()?;
    let d = cfg.d;
    let m = cfg.effective_magnitude();
    let mu = class_mean(d);
    let mu_c = control_class_mean(d);
    let w: Vec<f64> = mu.iter().map(|v| 2.0 * v).collect();

    let target_transform = match cfg.kind {
        ShiftKind::CovariateShift => DomainTransform {
            direction: shift_direction(d),
            offset: m,
            scale: 1.0 + SCALE_PER_MAGNITUDE * m,
        },
        _ => DomainTransform::identity(d),
    };
    let identity = DomainTransform::identity(d);
    let flip_threshold = match cfg.kind {
        ShiftKind::ConceptShift if m > 0.0 => Some(1.0 / m),
        _ => None,
    };

    let f_src = cfg.source_signal_fraction;
    let source_sampler = Sampler {
        mean: &mu,
        signal_fraction: f_src,
        transform: &identity,
    };
    let target_sampler = Sampler {
        mean: &mu,
        signal_fraction: f_src,
        transform: &target_transform,
    };
    let control_src_sampler = Sampler {
        mean: &mu_c,
        signal_fraction: f_src,
        transform: &identity,
    };
    let control_tgt_sampler = Sampler {
        mean: &mu_c,
        signal_fraction: f_src,
        transform: &target_transform,
    };

    let process = process_schema(d);

    let mut rng = Rng::stream(cfg.seed, 0);
    let (xs, ys) = source_sampler.labeled(&mut rng, cfg.n_source, d, &w);
    let source = Dataset::new(process.clone(), xs, Some(ys), None, None, Domain::Source)?;

    let mut rng = Rng::stream(cfg.seed, 1);
    let (xt, yt) = match cfg.kind {
        ShiftKind::PriorShift => resample_to_fraction(
            &source_sampler,
            &mut rng,
            cfg.n_target,
            d,
            &w,
            cfg.target_signal_fraction,
        ),
        ShiftKind::ConceptShift => {
            let x = source_sampler.features(&mut rng, cfg.n_target, d);
            let y = (0..cfg.n_target)
                .map(|r| {
                    let row = x.row(r);
                    let p = label_probability(&w, row);
                    let flipped = flip_threshold.is_some_and(|t| row[1] > t);
                    rng.bernoulli(if flipped { 1.0 - p } else { p }) as u8
                })
                .collect();
            (x, y)
        }
        ShiftKind::CovariateShift | ShiftKind::None => {
            target_sampler.labeled(&mut rng, cfg.n_target, d, &w)
        }
    };
    let target = Dataset::new(process, xt, Some(yt), None, None, Domain::Target)?;

    let mut rng = Rng::stream(cfg.seed, 2);
    let xcs = control_src_sampler.features(&mut rng, cfg.n_control_source, d);
    let control_source = Dataset::new(
        Schema::new(feature_names(d)),
        xcs,
        None,
        None,
        None,
        Domain::Source,
    )?;

    let mut rng = Rng::stream(cfg.seed, 3);
    let xct = control_tgt_sampler.features(&mut rng, cfg.n_control_target, d);
    let mut rng = Rng::stream(cfg.seed, 4);
    let weights = (0..cfg.n_control_target)
        .map(|_| rng.gamma_int(WEIGHT_GAMMA_SHAPE, WEIGHT_GAMMA_SCALE))
        .collect();
    let control_target = Dataset::new(
        control_target_schema(d),
        xct,
        None,
        Some(weights),
        None,
        Domain::Target,
    )?;

    Ok(ScenarioBundle {
        source,
        target,
        control_source,
        control_target,
        truth: ScenarioTruth {
            config: cfg.clone(),
            label_weights: w,
            class_mean: mu,
            control_class_mean: mu_c,
            process_transform: target_transform.clone(),
            control_transform: target_transform,
            concept_flip_threshold: flip_threshold,
        },
    })
}

/// Draws labeled rows until exactly `round(n·fraction)` are signal.
fn resample_to_fraction(
    sampler: &Sampler<'_>,
    rng: &mut Rng,
    n: usize,
    d: usize,
    w: &[f64],
    fraction: f64,
) -> (Matrix, Vec<u8>) {
    let want_signal = (libm::round(n as f64 * fraction) as usize).min(n);
    let mut want = [n - want_signal, want_signal];
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; d];
    while y.len() < n {
        draw_mixture(rng, sampler.mean, sampler.signal_fraction, &mut row);
        sampler.transform.apply(&mut row);
        let label = rng.bernoulli(label_probability(w, &row)) as u8;
        if want[label as usize] > 0 {
            want[label as usize] -= 1;
            x.row_mut(y.len()).copy_from_slice(&row);
            y.push(label);
        }
    }
    (x, y)
}
