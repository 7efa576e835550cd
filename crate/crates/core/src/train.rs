//! Training drivers.
//!
//! `train_nn` fits the class head and feature layer on labeled source rows.
//! `train_dann` adds, at every step, a domain batch drawn half from the
//! control source and half from the control target, whose gradient reaches
//! the feature layer reversed and scaled by λ.
//!
//! Random streams are derived from `cfg.seed`: split, init, class batches and
//! domain sampling each get their own, so a DANN run sees the same split,
//! initial weights and class batches as an NN run with the same seed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{self, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::network::{InitRule, LabeledBatch, NetParams};
use crate::optim::{AdamHyper, AdamState};
use crate::stats;

const STREAM_SPLIT: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_CLASS_BATCHES: u64 = 2;
const STREAM_DOMAIN: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LambdaMode {
    #[default]
    Constant,
    /// `value · (2 / (1 + exp(-10 p)) - 1)` at training progress `p`.
    GaninSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ModelKind {
    Nn,
    Dann,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nn => "nn",
            ModelKind::Dann => "dann",
        }
    }
}

#[cfg(feature = "serde")]
mod defaults {
    use super::*;
    pub fn hidden() -> usize {
        TrainConfig::DEFAULT_HIDDEN
    }
    pub fn batch_size() -> usize {
        TrainConfig::DEFAULT_BATCH_SIZE
    }
    pub fn train_fraction() -> f64 {
        TrainConfig::DEFAULT_TRAIN_FRACTION
    }
    pub fn lambda_value() -> f64 {
        1.0
    }
    pub fn domain_batch_size() -> usize {
        TrainConfig::DEFAULT_BATCH_SIZE
    }
}

/// Hyperparameters. `epochs` has no default; everything else defaults to the
/// reference protocol (100 hidden units, batches of 3000, 70/30 split, Adam
/// with its usual constants, constant λ = 1).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrainConfig {
    #[cfg_attr(feature = "serde", serde(default = "defaults::hidden"))]
    pub hidden: usize,
    #[cfg_attr(feature = "serde", serde(default = "defaults::batch_size"))]
    pub batch_size: usize,
    pub epochs: usize,
    #[cfg_attr(feature = "serde", serde(default = "defaults::train_fraction"))]
    pub train_fraction: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub adam: AdamHyper,
    #[cfg_attr(feature = "serde", serde(default))]
    pub lambda_mode: LambdaMode,
    #[cfg_attr(feature = "serde", serde(default = "defaults::lambda_value"))]
    pub lambda_value: f64,
    #[cfg_attr(feature = "serde", serde(default = "defaults::domain_batch_size"))]
    pub domain_batch_size: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub use_domain_weights: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

impl TrainConfig {
    pub const DEFAULT_HIDDEN: usize = 100;
    pub const DEFAULT_BATCH_SIZE: usize = 3000;
    pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

    pub fn with_epochs(epochs: usize) -> Self {
        TrainConfig {
            hidden: Self::DEFAULT_HIDDEN,
            batch_size: Self::DEFAULT_BATCH_SIZE,
            epochs,
            train_fraction: Self::DEFAULT_TRAIN_FRACTION,
            adam: AdamHyper::default(),
            lambda_mode: LambdaMode::Constant,
            lambda_value: 1.0,
            domain_batch_size: Self::DEFAULT_BATCH_SIZE,
            use_domain_weights: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("{key}: {why}")));
        if self.hidden == 0 {
            return bad("hidden", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction", "must lie in (0, 1)");
        }
        if !(self.lambda_value >= 0.0 && self.lambda_value.is_finite()) {
            return bad("lambda_value", "must be finite and >= 0");
        }
        if self.domain_batch_size < 2 {
            return bad("domain_batch_size", "must be at least 2");
        }
        self.adam.validate()
    }
}

/// λ at training progress `p ∈ [0, 1]`.
pub fn lambda_at(mode: LambdaMode, value: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Contract(format!(
            "progress must lie in [0, 1], got {p}"
        )));
    }
    Ok(match mode {
        LambdaMode::Constant => value,
        LambdaMode::GaninSchedule => value * (2.0 / (1.0 + libm::exp(-10.0 * p)) - 1.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Batch-size weighted mean over the epoch's steps.
    pub class_loss: f64,
    pub domain_loss: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct History {
    pub model: ModelKind,
    pub records: Vec<EpochRecord>,
}

/// Everything a training run produces. `train` and `test` are the
/// unstandardized split of the labeled input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub params: NetParams,
    pub standardizer: Standardizer,
    pub history: History,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn train_nn(cfg: &TrainConfig, labeled: &Dataset) -> Result<TrainRun> {
    run(cfg, labeled, None)
}

pub fn train_dann(
    cfg: &TrainConfig,
    labeled: &Dataset,
    control_source: &Dataset,
    control_target: &Dataset,
) -> Result<TrainRun> {
    run(cfg, labeled, Some((control_source, control_target)))
}

/// Signal probability for raw (unstandardized) rows.
pub fn predict(params: &NetParams, standardizer: &Standardizer, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != params.input_dim() {
        return Err(Error::Shape {
            op: "predict",
            left: x.shape(),
            right: params.w1.shape(),
        });
    }
    params.signal_probability(&standardizer.transform(x)?)
}

/// Cycles through a shuffled index order, reshuffling when exhausted.
struct Cursor {
    order: Vec<usize>,
    pos: usize,
}

impl Cursor {
    fn new(n: usize, rng: &mut Rng) -> Self {
        Cursor {
            order: rng.permutation(n),
            pos: 0,
        }
    }

    fn take(&mut self, k: usize, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                rng.shuffle(&mut self.order);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

struct DomainFeed {
    source: Matrix,
    target: Matrix,
    target_weights: Option<Vec<f64>>,
    src_cursor: Cursor,
    tgt_cursor: Cursor,
    rng: Rng,
    half: usize,
}

impl DomainFeed {
    fn next_batch(&mut self) -> Result<(Matrix, Vec<u8>, Option<Vec<f64>>)> {
        let si = self.src_cursor.take(self.half, &mut self.rng);
        let ti = self.tgt_cursor.take(self.half, &mut self.rng);
        let x = self
            .source
            .select_rows(&si)
            .vstack(&self.target.select_rows(&ti))?;
        let mut labels = vec![0u8; self.half];
        labels.resize(2 * self.half, 1);
        let weights = self.target_weights.as_ref().map(|w| {
            let mut out = vec![1.0; self.half];
            out.extend(ti.iter().map(|&i| w[i]));
            out
        });
        Ok((x, labels, weights))
    }
}

fn run(
    cfg: &TrainConfig,
    labeled: &Dataset,
    control: Option<(&Dataset, &Dataset)>,
) -> Result<TrainRun> {
    cfg.validate()?;
    if labeled.labels().is_none() {
        return Err(Error::Contract("training data has no labels".into()));
    }
    if labeled.n() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: labeled.n(),
        });
    }
    let d = labeled.d();

    let (train, test) = dataset::split(
        labeled,
        cfg.train_fraction,
        &mut Rng::stream(cfg.seed, STREAM_SPLIT),
    )?;
    let standardizer = Standardizer::fit(&train)?;
    let train_x = standardizer.transform(train.features())?;
    let test_x = standardizer.transform(test.features())?;
    let train_y = train.labels().unwrap_or_default();
    let test_y = test.labels().unwrap_or_default();

    let mut params = NetParams::init(
        d,
        cfg.hidden,
        &mut Rng::stream(cfg.seed, STREAM_INIT),
        InitRule::GlorotUniform,
    )?;
    let mut adam = AdamState::new(&params, cfg.adam)?;
    let mut batch_rng = Rng::stream(cfg.seed, STREAM_CLASS_BATCHES);

    let mut feed = match control {
        None => None,
        Some((cs, ct)) => Some(domain_feed(cfg, &standardizer, cs, ct)?),
    };
    let model = if feed.is_some() {
        ModelKind::Dann
    } else {
        ModelKind::Nn
    };

    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let progress = if cfg.epochs > 1 {
            epoch as f64 / (cfg.epochs - 1) as f64
        } else {
            0.0
        };
        let lambda = lambda_at(cfg.lambda_mode, cfg.lambda_value, progress)?;
        let (mut class_sum, mut domain_sum, mut seen) = (0.0, 0.0, 0usize);

        for idx in dataset::batch_indices(train.n(), cfg.batch_size, &mut batch_rng)? {
            let xb = train_x.select_rows(&idx);
            let yb: Vec<u8> = idx.iter().map(|&i| train_y[i]).collect();
            let class_batch = LabeledBatch {
                x: &xb,
                labels: &yb,
                weights: None,
            };

            let domain = match feed.as_mut() {
                Some(f) => Some(f.next_batch()?),
                None => None,
            };
            let domain_batch = domain.as_ref().map(|(x, y, w)| LabeledBatch {
                x,
                labels: y,
                weights: w.as_deref(),
            });

            let (grads, losses) =
                params.backward(Some(&class_batch), domain_batch.as_ref(), lambda)?;
            adam.step(&mut params, &grads)?;

            class_sum += losses.class.unwrap_or(0.0) * idx.len() as f64;
            domain_sum += losses.domain.unwrap_or(0.0) * idx.len() as f64;
            seen += idx.len();
        }

        let train_accuracy = stats::accuracy(&params.signal_probability(&train_x)?, train_y, 0.5)?;
        let test_accuracy = stats::accuracy(&params.signal_probability(&test_x)?, test_y, 0.5)?;
        let is_dann = model == ModelKind::Dann;
        records.push(EpochRecord {
            epoch: epoch + 1,
            train_accuracy,
            test_accuracy,
            class_loss: class_sum / seen as f64,
            domain_loss: is_dann.then(|| domain_sum / seen as f64),
            lambda: is_dann.then_some(lambda),
        });
    }

    Ok(TrainRun {
        params,
        standardizer,
        history: History { model, records },
        train,
        test,
    })
}

fn domain_feed(
    cfg: &TrainConfig,
    standardizer: &Standardizer,
    control_source: &Dataset,
    control_target: &Dataset,
) -> Result<DomainFeed> {
    for (name, ds) in [
        ("control_source", control_source),
        ("control_target", control_target),
    ] {
        if ds.n() == 0 {
            return Err(Error::Contract(format!("{name} is empty")));
        }
        if ds.d() != standardizer.d() {
            return Err(Error::Shape {
                op: "train_dann",
                left: ds.features().shape(),
                right: (1, standardizer.d()),
            });
        }
    }
    let target_weights = if cfg.use_domain_weights {
        let w = control_target.weights().ok_or_else(|| {
            Error::Contract("use_domain_weights is set but control_target has no weights".into())
        })?;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        Some(w.iter().map(|v| v / mean).collect())
    } else {
        None
    };
    let mut rng = Rng::stream(cfg.seed, STREAM_DOMAIN);
    let src_cursor = Cursor::new(control_source.n(), &mut rng);
    let tgt_cursor = Cursor::new(control_target.n(), &mut rng);
    Ok(DomainFeed {
        source: standardizer.transform(control_source.features())?,
        target: standardizer.transform(control_target.features())?,
        target_weights,
        src_cursor,
        tgt_cursor,
        rng,
        half: cfg.domain_batch_size / 2,
    })
}

/// How well the frozen hidden layer still separates the two domains.
///
/// Rows of both control sets are mapped through the standardizer and hidden
/// layer, split in half at random, and a fresh logistic regression (Adam,
/// lr 0.05, 200 full-batch epochs) is fit on one half. Returns its accuracy on
/// the other half. Pass rows that training never saw.
pub fn domain_probe(
    params: &NetParams,
    standardizer: &Standardizer,
    control_source: &Dataset,
    control_target: &Dataset,
    seed: u64,
) -> Result<f64> {
    let hs = params.hidden_layer(&standardizer.transform(control_source.features())?)?;
    let ht = params.hidden_layer(&standardizer.transform(control_target.features())?)?;
    let h = hs.vstack(&ht)?;
    let mut y = vec![0u8; hs.rows()];
    y.resize(h.rows(), 1);

    let mut rng = Rng::new(seed);
    let perm = rng.permutation(h.rows());
    let (fit_idx, eval_idx) = perm.split_at(h.rows() / 2);
    let fit_x = h.select_rows(fit_idx);
    let fit_y: Vec<f64> = fit_idx.iter().map(|&i| y[i] as f64).collect();

    let width = h.cols();
    let mut w = vec![0.0; width];
    let mut b = [0.0];
    let mut adam = AdamState::for_shapes(
        &[width, 1],
        AdamHyper {
            lr: 0.05,
            ..AdamHyper::default()
        },
    )?;
    let n = fit_x.rows() as f64;
    for _ in 0..200 {
        let mut gw = vec![0.0; width];
        let mut gb = 0.0;
        for (r, &target) in fit_y.iter().enumerate() {
            let row = fit_x.row(r);
            let z: f64 = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b[0];
            let err = (1.0 / (1.0 + libm::exp(-z)) - target) / n;
            for (g, a) in gw.iter_mut().zip(row) {
                *g += err * a;
            }
            gb += err;
        }
        adam.step_tensors(&mut [&mut w[..], &mut b[..]], &[&gw[..], &[gb][..]])?;
    }

    let hits = eval_idx
        .iter()
        .filter(|&&i| {
            let z: f64 = h.row(i).iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b[0];
            (z >= 0.0) == (y[i] == 1)
        })
        .count();
    Ok(hits as f64 / eval_idx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Domain, Schema};

    #[test]
    fn lambda_schedule() {
        assert_eq!(lambda_at(LambdaMode::GaninSchedule, 1.0, 0.0).unwrap(), 0.0);
        let end = lambda_at(LambdaMode::GaninSchedule, 2.0, 1.0).unwrap();
        assert!((end - 2.0 * 0.999_909_204_262_595_2).abs() < 1e-15);
        for p in [0.0, 0.3, 1.0] {
            assert_eq!(lambda_at(LambdaMode::Constant, 0.7, p).unwrap(), 0.7);
        }
        assert!(matches!(
            lambda_at(LambdaMode::Constant, 1.0, 1.5),
            Err(Error::Contract(_))
        ));
        assert!(lambda_at(LambdaMode::Constant, 1.0, -0.1).is_err());
    }

    #[test]
    fn predict_zero_network_and_hand_network() {
        let p = NetParams::zeros(2, 3);
        let x = Matrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        assert_eq!(
            predict(&p, &Standardizer::identity(2), &x).unwrap(),
            vec![0.5, 0.5]
        );

        let mut hand = NetParams::zeros(1, 1);
        hand.w1.set(0, 0, 1.0);
        hand.wc = Matrix::from_rows(&[[0.0, 2.0]]).unwrap();
        let out = predict(
            &hand,
            &Standardizer::identity(1),
            &Matrix::from_rows(&[[0.5]]).unwrap(),
        )
        .unwrap();
        assert!((out[0] - 0.715_904_090_297_548_1).abs() < 1e-12);
        assert!(predict(&hand, &Standardizer::identity(2), &x).is_err());
    }

    #[test]
    fn unlabeled_input_is_rejected() {
        let x = Matrix::zeros(20, 1);
        let ds = Dataset::new(
            Schema::new(vec!["a".into()]),
            x,
            None,
            None,
            None,
            Domain::Source,
        )
        .unwrap();
        let err = train_nn(&TrainConfig::with_epochs(1), &ds).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn config_validation_names_key() {
        let cfg = TrainConfig {
            train_fraction: 1.0,
            ..TrainConfig::with_epochs(3)
        };
        let msg = alloc::format!("{}", cfg.validate().unwrap_err());
        assert!(msg.contains("train_fraction"));
        assert!(TrainConfig::with_epochs(0).validate().is_err());
    }

    #[test]
    fn cursor_covers_before_repeating() {
        let mut rng = Rng::new(3);
        let mut c = Cursor::new(5, &mut rng);
        let mut first = c.take(5, &mut rng);
        first.sort_unstable();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.take(7, &mut rng).len(), 7);
    }
}
