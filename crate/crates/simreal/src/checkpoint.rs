//! Model checkpoint: parameters, standardizer and the input schema's
//! fingerprint in one JSON document. Floats are written in shortest
//! round-trip form, so save/load is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use simreal_core::linalg::Matrix;
use simreal_core::train::ModelKind;
use simreal_core::{NetParams, Schema, Standardizer};

use crate::error::{CliError, Result};

pub const FORMAT: &str = "simreal-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Matrix> for MatrixRepr {
    fn from(m: &Matrix) -> Self {
        MatrixRepr {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub model: ModelKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub feature_columns: Vec<String>,
    pub schema_fingerprint: String,
    pub standardizer: Standardizer,
    pub w1: MatrixRepr,
    pub b1: Vec<f64>,
    pub wc: MatrixRepr,
    pub bc: Vec<f64>,
    pub wd: MatrixRepr,
    pub bd: Vec<f64>,
}

impl Checkpoint {
    pub fn new(
        model: ModelKind,
        schema: &Schema,
        params: &NetParams,
        standardizer: &Standardizer,
    ) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            model,
            input_dim: params.input_dim(),
            hidden: params.hidden(),
            feature_columns: schema.feature_columns.clone(),
            schema_fingerprint: schema.fingerprint(),
            standardizer: standardizer.clone(),
            w1: (&params.w1).into(),
            b1: params.b1.clone(),
            wc: (&params.wc).into(),
            bc: params.bc.clone(),
            wd: (&params.wd).into(),
            bd: params.bd.clone(),
        }
    }

    /// Rebuilds and validates the parameters.
    pub fn params(&self) -> simreal_core::Result<NetParams> {
        let m = |r: &MatrixRepr| Matrix::new(r.rows, r.cols, r.data.clone());
        let p = NetParams {
            w1: m(&self.w1)?,
            b1: self.b1.clone(),
            wc: m(&self.wc)?,
            bc: self.bc.clone(),
            wd: m(&self.wd)?,
            bd: self.bd.clone(),
        };
        p.validate()?;
        if p.input_dim() != self.input_dim || p.hidden() != self.hidden {
            return Err(simreal_core::Error::Validation(
                "checkpoint dimensions disagree with weight shapes".into(),
            ));
        }
        self.standardizer.validate()?;
        if self.standardizer.d() != self.input_dim {
            return Err(simreal_core::Error::Validation(
                "checkpoint standardizer width disagrees with input_dim".into(),
            ));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
        if ck.format != FORMAT {
            return Err(CliError::parse(
                path,
                format!("unsupported checkpoint format `{}`", ck.format),
            ));
        }
        ck.params()
            .map_err(|e| CliError::parse(path, e.to_string()))?;
        Ok(ck)
    }
}
