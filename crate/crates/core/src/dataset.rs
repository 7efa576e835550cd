//! Tabular samples: features, optional 0/1 labels, optional per-row weights
//! and a domain tag.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};

/// Which side of the sim/real divide a sample comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Domain {
    /// Simulation.
    Source,
    /// Real data.
    Target,
}

impl Domain {
    /// 0 for source, 1 for target: the domain head's class index.
    pub fn label(self) -> u8 {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }
}

/// Column selection for a tabular file.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Schema {
    pub feature_columns: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub label_column: Option<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub weight_column: Option<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub id_column: Option<String>,
}

impl Schema {
    pub fn new(feature_columns: Vec<String>) -> Self {
        Schema {
            feature_columns,
            label_column: None,
            weight_column: None,
            id_column: None,
        }
    }

    pub fn with_label(mut self, name: impl Into<String>) -> Self {
        self.label_column = Some(name.into());
        self
    }

    pub fn with_weight(mut self, name: impl Into<String>) -> Self {
        self.weight_column = Some(name.into());
        self
    }

    pub fn with_id(mut self, name: impl Into<String>) -> Self {
        self.id_column = Some(name.into());
        self
    }

    /// Same features, label and weight columns dropped.
    pub fn features_only(&self) -> Schema {
        Schema {
            feature_columns: self.feature_columns.clone(),
            label_column: None,
            weight_column: None,
            id_column: self.id_column.clone(),
        }
    }

    pub fn d(&self) -> usize {
        self.feature_columns.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Config("schema has no feature columns".into()));
        }
        for (i, name) in self.feature_columns.iter().enumerate() {
            if self.feature_columns[..i].contains(name) {
                return Err(Error::Config(format!("duplicate feature column `{name}`")));
            }
        }
        let extras = [&self.label_column, &self.weight_column, &self.id_column];
        for (i, extra) in extras.iter().enumerate() {
            let Some(name) = extra else { continue };
            if self.feature_columns.contains(name) {
                return Err(Error::Config(format!(
                    "column `{name}` is both a feature and a label/weight/id column"
                )));
            }
            if extras[..i].iter().any(|e| e.as_ref() == Some(name)) {
                return Err(Error::Config(format!("column `{name}` used twice")));
            }
        }
        Ok(())
    }

    /// FNV-1a over the ordered feature names, as 16 hex digits.
    ///
    /// Label, weight and id columns do not take part: a model only cares
    /// about its input space.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for name in &self.feature_columns {
            name.bytes().for_each(&mut eat);
            eat(0x1f);
        }
        format!("{h:016x}")
    }
}

/// An in-memory sample. Rows keep their ids through `select`, `split` and
/// `batches`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Option<Vec<u8>>,
    weights: Option<Vec<f64>>,
    ids: Vec<u64>,
    domain: Domain,
    schema: Schema,
}

impl Dataset {
    /// Validates and assembles a dataset. Ids default to `0..n`.
    pub fn new(
        schema: Schema,
        features: Matrix,
        labels: Option<Vec<u8>>,
        weights: Option<Vec<f64>>,
        ids: Option<Vec<u64>>,
        domain: Domain,
    ) -> Result<Self> {
        schema.validate()?;
        let n = features.rows();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if features.cols() != schema.d() {
            return Err(Error::Shape {
                op: "Dataset::new",
                left: features.shape(),
                right: (1, schema.d()),
            });
        }
        if !features.is_finite() {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        if let Some(labels) = &labels {
            check_len("labels", labels.len(), n)?;
            if let Some(i) = labels.iter().position(|&l| l > 1) {
                return Err(Error::Validation(format!(
                    "label {} at row {} is not 0 or 1",
                    labels[i], i
                )));
            }
        }
        if let Some(weights) = &weights {
            check_len("weights", weights.len(), n)?;
            validate_weights(weights)?;
        }
        let ids = match ids {
            Some(ids) => {
                check_len("ids", ids.len(), n)?;
                ids
            }
            None => (0..n as u64).collect(),
        };
        Ok(Dataset {
            features,
            labels,
            weights,
            ids,
            domain,
            schema,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Drops the labels, e.g. before handing a target sample to training.
    pub fn without_labels(&self) -> Dataset {
        let mut out = self.clone();
        out.labels = None;
        out.schema.label_column = None;
        out
    }

    /// Copy of the given rows in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            weights: self
                .weights
                .as_ref()
                .map(|w| idx.iter().map(|&i| w[i]).collect()),
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            domain: self.domain,
            schema: self.schema.clone(),
        }
    }

    /// Same rows with replaced features (same shape).
    fn with_features(&self, features: Matrix) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }
}

fn check_len(what: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::Validation(format!(
            "{what} has {got} entries, expected {n}"
        )));
    }
    Ok(())
}

/// Weights must be finite and non-negative with a strictly positive total.
pub fn validate_weights(weights: &[f64]) -> Result<()> {
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Validation(format!(
            "weight {} at row {} is negative or non-finite",
            weights[i], i
        )));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Validation("weights sum to zero".into()));
    }
    Ok(())
}

/// Per-feature location and scale.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Standard deviations below this pass the feature through unscaled.
pub const MIN_SCALE: f64 = 1e-12;

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: alloc::vec![0.0; d],
            scale: alloc::vec![1.0; d],
        }
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }

    /// Unweighted mean and population standard deviation per feature, even
    /// when the dataset carries weights.
    pub fn fit(ds: &Dataset) -> Result<Self> {
        let n = ds.n();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        let x = ds.features();
        let nf = n as f64;
        let mean: Vec<f64> = x.column_sums().into_iter().map(|s| s / nf).collect();
        let mut ss = alloc::vec![0.0; ds.d()];
        for r in 0..n {
            for ((acc, &v), &m) in ss.iter_mut().zip(x.row(r)).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = ss
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / nf);
                if sd < MIN_SCALE {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.scale.len() {
            return Err(Error::Validation(
                "standardizer mean/scale lengths differ".into(),
            ));
        }
        if self.mean.iter().any(|m| !m.is_finite())
            || self.scale.iter().any(|s| !s.is_finite() || *s <= 0.0)
        {
            return Err(Error::Validation(
                "standardizer needs finite means and positive finite scales".into(),
            ));
        }
        Ok(())
    }

    fn check_dim(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d() {
            return Err(Error::Shape {
                op: "standardize",
                left: x.shape(),
                right: (1, self.d()),
            });
        }
        Ok(())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dim(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, &m), &s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        self.check_dim(z)?;
        let mut out = z.clone();
        for r in 0..out.rows() {
            for ((v, &m), &s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    /// Standardized copy of `ds`; labels, weights, ids and domain untouched.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(ds.with_features(self.transform(ds.features())?))
    }
}

/// Random train/test partition. The train part gets `⌊n·fraction⌋` rows.
pub fn split(ds: &Dataset, train_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.n();
    let n_train = libm::floor(n as f64 * train_fraction) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let perm = rng.permutation(n);
    Ok((ds.select(&perm[..n_train]), ds.select(&perm[n_train..])))
}

/// One epoch of shuffled row indices cut into `⌈n/batch_size⌉` batches.
pub fn batch_indices(n: usize, batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let perm = rng.permutation(n);
    Ok(perm.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn batches(ds: &Dataset, batch_size: usize, rng: &mut Rng) -> Result<Vec<Dataset>> {
    Ok(batch_indices(ds.n(), batch_size, rng)?
        .iter()
        .map(|idx| ds.select(idx))
        .collect())
}
