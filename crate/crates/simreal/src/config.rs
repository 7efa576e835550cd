//! Run configuration: one JSON document shared by every subcommand.
//!
//! ```json
//! {
//!   "scenario": { "kind": "covariate_shift", "seed": 3 },
//!   "train": { "epochs": 100, "lambda_value": 30.0 },
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config
//! file. `data` lists the input tables (`source`, `target`,
//! `control_source`, `control_target`); each command requires only the ones
//! it reads. Without a `schema` section the synthetic column layout for
//! `scenario.d` is assumed (`f0..`, `signal`, `weight`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simreal_core::stats::DEFAULT_KS_THRESHOLD;
use simreal_core::synth::{self, LABEL_COLUMN, WEIGHT_COLUMN};
use simreal_core::{ScenarioConfig, Schema, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub control_source: Option<PathBuf>,
    pub control_target: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schema: Option<Schema>,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_threshold")]
    pub agreement_threshold: f64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_threshold() -> f64 {
    DEFAULT_KS_THRESHOLD
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: None,
            data: DataPaths::default(),
            train: None,
            scenario: ScenarioConfig::default(),
            output_dir: default_output_dir(),
            agreement_threshold: default_threshold(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: simreal_core::Error| CliError::Config(e.to_string());
        self.scenario.validate().map_err(cfg_err)?;
        if let Some(t) = &self.train {
            t.validate().map_err(cfg_err)?;
        }
        if let Some(s) = &self.schema {
            s.validate().map_err(cfg_err)?;
        }
        if !(self.agreement_threshold > 0.0 && self.agreement_threshold <= 1.0) {
            return Err(CliError::Config(format!(
                "agreement_threshold must lie in (0, 1], got {}",
                self.agreement_threshold
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Resolved path of a `data` entry, or a config error naming the key.
    pub fn data_path(&self, key: &str) -> Result<PathBuf> {
        let given = match key {
            "source" => &self.data.source,
            "target" => &self.data.target,
            "control_source" => &self.data.control_source,
            "control_target" => &self.data.control_target,
            _ => unreachable!("unknown data key {key}"),
        };
        given
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| CliError::Config(format!("missing `data.{key}` path")))
    }

    /// Full schema of the labeled process tables, and of the weighted
    /// control-target table when it has a weight column.
    pub fn schema(&self) -> Schema {
        match &self.schema {
            Some(s) => s.clone(),
            None => Schema::new(synth::feature_names(self.scenario.d))
                .with_label(LABEL_COLUMN)
                .with_weight(WEIGHT_COLUMN),
        }
    }

    pub fn train_config(&self) -> Result<&TrainConfig> {
        self.train
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `train` section (with `epochs`)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_everything_but_train() {
        let cfg = RunConfig::from_json("{}", Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.scenario, ScenarioConfig::default());
        assert!(cfg.train_config().is_err());
        assert_eq!(cfg.output_dir(), PathBuf::from("/tmp/x/out"));
        let e = cfg.data_path("control_target").unwrap_err();
        assert!(e.to_string().contains("data.control_target"), "{e}");
        assert_eq!(cfg.schema().feature_columns.len(), 10);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = RunConfig::from_json(
            r#"{"data": {"source": "a/s.csv", "target": "/abs/t.csv"}}"#,
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(
            cfg.data_path("source").unwrap(),
            PathBuf::from("/cfg/a/s.csv")
        );
        assert_eq!(
            cfg.data_path("target").unwrap(),
            PathBuf::from("/abs/t.csv")
        );
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_json(r#"{"train": {"epochs": 3, "lr": 0.1}}"#, Path::new("."))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("train"), "{msg}");
        assert!(msg.contains("lr"), "{msg}");
    }

    #[test]
    fn bad_enum_value_names_the_key() {
        let err = RunConfig::from_json(r#"{"scenario": {"kind": "banana"}}"#, Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("kind"), "{err}");
        assert_eq!(err.exit_code(), crate::ExitCode::Config);
    }

    #[test]
    fn range_errors_name_the_key() {
        let err = RunConfig::from_json(
            r#"{"train": {"epochs": 3, "train_fraction": 1.5}}"#,
            Path::new("."),
        )
        .unwrap_err();
        assert!(err.to_string().contains("train_fraction"), "{err}");
    }
}
