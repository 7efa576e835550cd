//! Subcommand bodies. Each returns what it wrote so the binary (and tests)
//! can report it; none of them touch their input files.

use std::fs;
use std::path::{Path, PathBuf};

use simreal_core::stats::{accuracy, agreement_check, density_histogram, KsReport, WeightedSample};
use simreal_core::synth::generate;
use simreal_core::train::{predict, train_dann, train_nn, LambdaMode, ModelKind};
use simreal_core::{Dataset, Domain, NetParams, Schema, Standardizer};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::csv_io::{has_column, load_csv, write_csv};
use crate::error::{CliError, Result};
use crate::history_io::write_history;

pub const HISTOGRAM_BINS: usize = 50;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

/// Labeled process tables: features and label, no weights.
pub fn process_schema(schema: &Schema) -> Schema {
    Schema {
        weight_column: None,
        ..schema.clone()
    }
}

pub fn control_source_schema(schema: &Schema) -> Schema {
    schema.features_only()
}

pub fn control_target_schema(schema: &Schema) -> Schema {
    Schema {
        weight_column: schema.weight_column.clone(),
        ..schema.features_only()
    }
}

/// Control source is read without labels or weights; control target with
/// the schema's weight column, if it names one.
pub fn load_controls(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let cs_path = cfg.data_path("control_source")?;
    let ct_path = cfg.data_path("control_target")?;
    let schema = cfg.schema();
    let cs = load_csv(&cs_path, &control_source_schema(&schema), Domain::Source)?;
    let ct = load_csv(&ct_path, &control_target_schema(&schema), Domain::Target)?;
    Ok((cs, ct))
}

/// Writes the four scenario tables and `truth.json` into the output
/// directory.
pub fn synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let bundle = generate(&cfg.scenario).map_err(|e| CliError::Config(e.to_string()))?;
    let out = cfg.output_dir();
    ensure_dir(&out)?;
    let mut written = Vec::new();
    for (name, ds) in [
        ("source.csv", &bundle.source),
        ("target.csv", &bundle.target),
        ("control_source.csv", &bundle.control_source),
        ("control_target.csv", &bundle.control_target),
    ] {
        let p = out.join(name);
        write_csv(&p, ds)?;
        written.push(p);
    }
    let p = out.join("truth.json");
    write_json(&p, &bundle.truth)?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Evaluation {
    pub model: ModelKind,
    pub source_test_accuracy: f64,
    /// Only when the target table carries labels (synthetic scenarios).
    /// Never used for training.
    pub target_test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: ModelKind,
    pub dir: PathBuf,
    pub evaluation: Evaluation,
    pub lambda: Option<(LambdaMode, f64)>,
}

/// Trains one model and writes `checkpoint.json`, `history.csv`,
/// `history.json` and `evaluation.json` into `<output_dir>/<model>/`.
pub fn train(cfg: &RunConfig, model: ModelKind) -> Result<TrainSummary> {
    let tc = cfg.train_config()?;
    let schema = cfg.schema();
    if schema.label_column.is_none() {
        return Err(CliError::Config("schema has no `label_column`".into()));
    }
    let source_path = cfg.data_path("source")?;
    let controls = match model {
        ModelKind::Nn => None,
        ModelKind::Dann => {
            cfg.data_path("control_source")?;
            cfg.data_path("control_target")?;
            Some(load_controls(cfg)?)
        }
    };
    let source = load_csv(&source_path, &process_schema(&schema), Domain::Source)?;
    let run = match &controls {
        None => train_nn(tc, &source)?,
        Some((cs, ct)) => train_dann(tc, &source, cs, ct)?,
    };

    let target_test_accuracy = match &cfg.data.target {
        Some(_) => {
            let path = cfg.data_path("target")?;
            let label = schema.label_column.as_deref().unwrap_or_default();
            if has_column(&path, label)? {
                let target = load_csv(&path, &process_schema(&schema), Domain::Target)?;
                let probs = predict(&run.params, &run.standardizer, target.features())?;
                Some(accuracy(&probs, target.labels().unwrap_or_default(), 0.5)?)
            } else {
                None
            }
        }
        None => None,
    };
    let evaluation = Evaluation {
        model,
        source_test_accuracy: run
            .history
            .records
            .last()
            .map_or(f64::NAN, |r| r.test_accuracy),
        target_test_accuracy,
    };

    let dir = cfg.output_dir().join(model.as_str());
    ensure_dir(&dir)?;
    Checkpoint::new(model, &schema, &run.params, &run.standardizer)
        .save(&dir.join("checkpoint.json"))?;
    write_history(&dir, &run.history)?;
    write_json(&dir.join("evaluation.json"), &evaluation)?;
    Ok(TrainSummary {
        model,
        dir,
        evaluation,
        lambda: (model == ModelKind::Dann).then_some((tc.lambda_mode, tc.lambda_value)),
    })
}

/// Classifier outputs on the control tables: source side unit-weighted,
/// target side carrying its weights (if any).
pub fn control_scores(
    params: &NetParams,
    standardizer: &Standardizer,
    control_source: &Dataset,
    control_target: &Dataset,
) -> Result<(WeightedSample, WeightedSample)> {
    let s = predict(params, standardizer, control_source.features())?;
    let t = predict(params, standardizer, control_target.features())?;
    Ok((
        WeightedSample::unweighted(s)?,
        WeightedSample::new(t, control_target.weights().map(<[f64]>::to_vec))?,
    ))
}

/// Scores both control tables with the checkpoint and compares the score
/// distributions (target side weighted). Writes `agreement.json` and
/// `histogram.csv` into `out_dir`.
pub fn agreement(cfg: &RunConfig, checkpoint: &Path, out_dir: &Path) -> Result<KsReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let schema = cfg.schema();
    if ck.feature_columns != schema.feature_columns || ck.schema_fingerprint != schema.fingerprint()
    {
        return Err(CliError::Mismatch(format!(
            "checkpoint was trained on columns {:?} (fingerprint {}), config has {:?} (fingerprint {})",
            ck.feature_columns,
            ck.schema_fingerprint,
            schema.feature_columns,
            schema.fingerprint()
        )));
    }
    let params = ck.params()?;
    let (cs, ct) = load_controls(cfg)?;
    let (s, t) = control_scores(&params, &ck.standardizer, &cs, &ct)?;
    let report = agreement_check(&s, &t, cfg.agreement_threshold)?;

    ensure_dir(out_dir)?;
    write_json(&out_dir.join("agreement.json"), &report)?;
    let hs = density_histogram(&s, HISTOGRAM_BINS, 0.0, 1.0)?;
    let ht = density_histogram(&t, HISTOGRAM_BINS, 0.0, 1.0)?;
    let mut csv = String::from("bin_low,bin_high,density_source,density_target\n");
    let width = 1.0 / HISTOGRAM_BINS as f64;
    for k in 0..HISTOGRAM_BINS {
        let lo = k as f64 * width;
        let hi = if k + 1 == HISTOGRAM_BINS {
            1.0
        } else {
            (k + 1) as f64 * width
        };
        csv.push_str(&format!("{lo},{hi},{},{}\n", hs[k], ht[k]));
    }
    let p = out_dir.join("histogram.csv");
    fs::write(&p, csv).map_err(|e| CliError::io(&p, e))?;
    Ok(report)
}

pub fn report(histories: &[PathBuf], out: &Path) -> Result<usize> {
    let hs = histories
        .iter()
        .map(|p| crate::history_io::read_history(p))
        .collect::<Result<Vec<_>>>()?;
    let csv = crate::history_io::report_csv(&hs);
    let rows = csv.lines().count() - 1;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(out, csv).map_err(|e| CliError::io(out, e))?;
    Ok(rows)
}
