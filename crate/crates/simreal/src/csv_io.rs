//! CSV ingestion and emission for [`Dataset`]s.
//!
//! Files are UTF-8 with a header row and `.` decimals; columns are picked by
//! name, so extra columns are ignored and order does not matter.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use simreal_core::linalg::Matrix;
use simreal_core::{Dataset, Domain, Schema};

use crate::error::{CliError, Result};

pub fn load_csv(path: &Path, schema: &Schema, domain: Domain) -> Result<Dataset> {
    schema.validate()?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::parse(path, format!("bad header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::parse(path, format!("missing column `{name}`")))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = schema.label_column.as_deref().map(find).transpose()?;
    let weight_idx = schema.weight_column.as_deref().map(find).transpose()?;
    let id_idx = schema.id_column.as_deref().map(find).transpose()?;

    let d = feature_idx.len();
    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    let mut weights = weight_idx.map(|_| Vec::new());
    let mut ids = id_idx.map(|_| Vec::new());

    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
        let cell = |idx: usize| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| {
                CliError::parse(
                    path,
                    format!(
                        "line {line}: column `{}`: `{raw}` is not a number",
                        &headers[idx]
                    ),
                )
            })
        };
        for &j in &feature_idx {
            data.push(cell(j)?);
        }
        if let (Some(j), Some(out)) = (label_idx, labels.as_mut()) {
            let v = cell(j)?;
            if v != 0.0 && v != 1.0 {
                return Err(CliError::parse(
                    path,
                    format!("line {line}: label {v} is not 0 or 1"),
                ));
            }
            out.push(v as u8);
        }
        if let (Some(j), Some(out)) = (weight_idx, weights.as_mut()) {
            let v = cell(j)?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::parse(
                    path,
                    format!("line {line}: weight {v} is negative or non-finite"),
                ));
            }
            out.push(v);
        }
        if let (Some(j), Some(out)) = (id_idx, ids.as_mut()) {
            let raw = record.get(j).unwrap_or("").trim();
            let id = raw.parse::<u64>().map_err(|_| {
                CliError::parse(path, format!("line {line}: id `{raw}` is not an integer"))
            })?;
            out.push(id);
        }
    }
    let n = data.len() / d;
    let features = Matrix::new(n, d, data)?;
    Dataset::new(schema.clone(), features, labels, weights, ids, domain)
        .map_err(|e| CliError::parse(path, e.to_string()))
}

/// Whether the header row of `path` names `column`.
pub fn has_column(path: &Path, column: &str) -> Result<bool> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::parse(path, format!("bad header: {e}")))?;
    Ok(headers.iter().any(|h| h.trim() == column))
}

/// Writes features, then label and weight columns when present, in the
/// column names of the dataset's schema. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut out = String::new();
    let schema = ds.schema();
    let mut header: Vec<&str> = schema.feature_columns.iter().map(String::as_str).collect();
    if let (Some(name), Some(_)) = (schema.label_column.as_deref(), ds.labels()) {
        header.push(name);
    }
    if let (Some(name), Some(_)) = (schema.weight_column.as_deref(), ds.weights()) {
        header.push(name);
    }
    out.push_str(&header.join(","));
    out.push('\n');
    let x = ds.features();
    for r in 0..ds.n() {
        let mut cells: Vec<String> = x.row(r).iter().map(|v| v.to_string()).collect();
        if schema.label_column.is_some() {
            if let Some(l) = ds.labels() {
                cells.push(l[r].to_string());
            }
        }
        if schema.weight_column.is_some() {
            if let Some(w) = ds.weights() {
                cells.push(w[r].to_string());
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| CliError::io(path, e))
}
