//! Training history as CSV and JSON, and the long-format report.

use std::fs;
use std::path::Path;

use simreal_core::train::{EpochRecord, ModelKind};
use simreal_core::History;

use crate::error::{CliError, Result};

pub const HISTORY_HEADER: &str =
    "model,epoch,train_accuracy,test_accuracy,class_loss,domain_loss,lambda";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn history_csv(h: &History) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in &h.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            h.model.as_str(),
            r.epoch,
            r.train_accuracy,
            r.test_accuracy,
            r.class_loss,
            opt(r.domain_loss),
            opt(r.lambda)
        ));
    }
    out
}

pub fn write_history(dir: &Path, h: &History) -> Result<()> {
    let csv_path = dir.join("history.csv");
    fs::write(&csv_path, history_csv(h)).map_err(|e| CliError::io(&csv_path, e))?;
    let json_path = dir.join("history.json");
    let mut json = serde_json::to_string_pretty(h).expect("history serializes");
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| CliError::io(&json_path, e))
}

fn parse_model(s: &str) -> Option<ModelKind> {
    match s {
        "nn" => Some(ModelKind::Nn),
        "dann" => Some(ModelKind::Dann),
        _ => None,
    }
}

fn parse_history_csv(path: &Path, text: &str) -> Result<History> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::parse(path, e.to_string()))?
        .clone();
    let expected: Vec<&str> = HISTORY_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::parse(
            path,
            format!("expected header `{HISTORY_HEADER}`"),
        ));
    }
    let mut model = None;
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::parse(path, format!("line {line}: {e}")))?;
        let bad = |what: &str| CliError::parse(path, format!("line {line}: bad {what}"));
        let m = parse_model(&rec[0]).ok_or_else(|| bad("model"))?;
        if *model.get_or_insert(m) != m {
            return Err(bad("model (mixed models in one file)"));
        }
        let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
        let opt_num = |j: usize, what: &str| {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                num(j, what).map(Some)
            }
        };
        records.push(EpochRecord {
            epoch: rec[1].parse().map_err(|_| bad("epoch"))?,
            train_accuracy: num(2, "train_accuracy")?,
            test_accuracy: num(3, "test_accuracy")?,
            class_loss: num(4, "class_loss")?,
            domain_loss: opt_num(5, "domain_loss")?,
            lambda: opt_num(6, "lambda")?,
        });
    }
    let model = model.ok_or_else(|| CliError::parse(path, "history has no rows"))?;
    Ok(History { model, records })
}

/// Reads `history.csv` or `history.json`, chosen by extension.
pub fn read_history(path: &Path) -> Result<History> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))
        }
        _ => parse_history_csv(path, &text),
    }
}

/// One row per (model, epoch, metric); absent metrics are skipped.
pub fn report_csv(histories: &[History]) -> String {
    let mut out = String::from("model,epoch,metric,value\n");
    for h in histories {
        for r in &h.records {
            let metrics = [
                ("train_accuracy", Some(r.train_accuracy)),
                ("test_accuracy", Some(r.test_accuracy)),
                ("class_loss", Some(r.class_loss)),
                ("domain_loss", r.domain_loss),
                ("lambda", r.lambda),
            ];
            for (name, v) in metrics {
                if let Some(v) = v {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        h.model.as_str(),
                        r.epoch,
                        name,
                        v
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: ModelKind) -> History {
        let dann = model == ModelKind::Dann;
        History {
            model,
            records: (1..=3)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_accuracy: 0.5 + e as f64 / 10.0,
                    test_accuracy: 0.1 / 3.0 * e as f64,
                    class_loss: 1.0 / e as f64,
                    domain_loss: dann.then_some(0.69),
                    lambda: dann.then_some(1.0),
                })
                .collect(),
        }
    }

    #[test]
    fn nn_rows_have_empty_domain_cells() {
        let csv = history_csv(&sample(ModelKind::Nn));
        let row = csv.lines().nth(1).unwrap();
        assert!(row.starts_with("nn,1,"));
        assert!(row.ends_with(",,"), "{row}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for model in [ModelKind::Nn, ModelKind::Dann] {
            let h = sample(model);
            write_history(dir.path(), &h).unwrap();
            assert_eq!(read_history(&dir.path().join("history.csv")).unwrap(), h);
            assert_eq!(read_history(&dir.path().join("history.json")).unwrap(), h);
        }
    }

    #[test]
    fn report_counts_rows() {
        let out = report_csv(&[sample(ModelKind::Nn), sample(ModelKind::Dann)]);
        assert_eq!(out.lines().count(), 1 + 3 * 3 + 3 * 5);
    }

    #[test]
    fn malformed_history_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        fs::write(&p, format!("{HISTORY_HEADER}\nnn,one,0,0,0,,\n")).unwrap();
        let e = read_history(&p).unwrap_err();
        assert_eq!(e.exit_code(), crate::ExitCode::IoParse);
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
