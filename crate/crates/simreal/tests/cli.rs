use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_simreal");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "scenario": {"d": 4, "n_source": 400, "n_target": 400,
               "n_control_source": 200, "n_control_target": 200, "seed": 5},
  "train": {"epochs": 3, "batch_size": 64, "hidden": 8, "domain_batch_size": 64, "seed": 2},
  "data": {"source": "out/source.csv", "target": "out/target.csv",
           "control_source": "out/control_source.csv",
           "control_target": "out/control_target.csv"},
  "output_dir": "out"
}"#;

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn synth(dir: &Path) {
    let o = run(dir, &["synth", "--config", "run.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn synth_writes_files_deterministically() {
    let (dir, _) = setup(SMALL);
    synth(dir.path());
    let out = dir.path().join("out");
    let names = [
        "source.csv",
        "target.csv",
        "control_source.csv",
        "control_target.csv",
        "truth.json",
    ];
    let first: Vec<Vec<u8>> = names
        .iter()
        .map(|n| fs::read(out.join(n)).unwrap())
        .collect();
    let header = String::from_utf8_lossy(&first[3])
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "f0,f1,f2,f3,weight");
    let header = String::from_utf8_lossy(&first[2])
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "f0,f1,f2,f3");
    synth(dir.path());
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(
            &fs::read(out.join(n)).unwrap(),
            bytes,
            "{n} differs on rerun"
        );
    }
}

#[test]
fn bad_kind_is_a_config_error() {
    let (dir, _) = setup(r#"{"scenario": {"kind": "banana"}}"#);
    let o = run(dir.path(), &["synth", "--config", "run.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("kind"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let (dir, _) = setup(r#"{"output_dir": "out", "epochs": 3}"#);
    let o = run(dir.path(), &["synth", "--config", "run.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epochs"), "{}", stderr(&o));
}

#[test]
fn train_nn_and_dann() {
    let (dir, _) = setup(SMALL);
    synth(dir.path());
    let o = run(
        dir.path(),
        &["train", "--config", "run.json", "--model", "nn"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        stdout(&o).contains("nn: final test accuracy"),
        "{}",
        stdout(&o)
    );
    assert!(stdout(&o).contains("target accuracy"), "{}", stdout(&o));
    let nn = dir.path().join("out/nn");
    let hist = fs::read_to_string(nn.join("history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 3 + 1);
    for f in ["checkpoint.json", "history.json", "evaluation.json"] {
        assert!(nn.join(f).exists(), "{f}");
    }

    let o = run(
        dir.path(),
        &["train", "--config", "run.json", "--model", "dann"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("lambda constant"), "{}", stdout(&o));
    let hist = fs::read_to_string(dir.path().join("out/dann/history.csv")).unwrap();
    assert!(hist.lines().nth(1).unwrap().starts_with("dann,1,"));
}

#[test]
fn flags_override_config() {
    let (dir, _) = setup(SMALL);
    synth(dir.path());
    let o = run(
        dir.path(),
        &[
            "train",
            "--config",
            "run.json",
            "--model",
            "nn",
            "--epochs",
            "2",
            "--output-dir",
            "other",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let hist = fs::read_to_string(dir.path().join("other/nn/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 2 + 1);
}

#[test]
fn dann_without_control_target_path_is_a_config_error() {
    let cfg = SMALL.replace(
        ",\n           \"control_target\": \"out/control_target.csv\"",
        "",
    );
    assert!(!cfg.contains("\"control_target\""));
    let (dir, _) = setup(&cfg);
    synth(dir.path());
    let o = run(
        dir.path(),
        &["train", "--config", "run.json", "--model", "dann"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("data.control_target"), "{}", stderr(&o));
}

#[test]
fn unreadable_csv_is_an_io_error() {
    let (dir, _) = setup(SMALL);
    let o = run(
        dir.path(),
        &["train", "--config", "run.json", "--model", "nn"],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn agreement_outputs_and_exit_codes() {
    let (dir, _) = setup(SMALL);
    synth(dir.path());
    for model in ["nn", "dann"] {
        let o = run(
            dir.path(),
            &["train", "--config", "run.json", "--model", model],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let inputs: Vec<Vec<u8>> = ["control_source.csv", "control_target.csv"]
        .iter()
        .map(|n| fs::read(dir.path().join("out").join(n)).unwrap())
        .collect();

    let o = run(
        dir.path(),
        &[
            "agreement",
            "--config",
            "run.json",
            "--checkpoint",
            "out/dann/checkpoint.json",
        ],
    );
    let c = code(&o);
    assert!(c == 0 || c == 1, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/dann/agreement.json")).unwrap(),
    )
    .unwrap();
    let stat = report["statistic"].as_f64().unwrap();
    assert_eq!(report["pass"].as_bool().unwrap(), stat < 0.09);
    assert_eq!(c == 0, stat < 0.09);
    assert_eq!(report["n_source"], 200);
    assert_eq!(report["n_target"], 200);

    let hist = fs::read_to_string(dir.path().join("out/dann/histogram.csv")).unwrap();
    let mut lines = hist.lines();
    assert_eq!(
        lines.next().unwrap(),
        "bin_low,bin_high,density_source,density_target"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[49][1], 1.0);
    for col in [2, 3] {
        let area: f64 = rows.iter().map(|r| r[col] * (r[1] - r[0])).sum();
        assert!((area - 1.0).abs() < 1e-9, "area {area}");
    }

    // A threshold nothing can beat forces exit 1.
    let strict = SMALL.replace(
        "\"output_dir\": \"out\"",
        "\"output_dir\": \"out\", \"agreement_threshold\": 1e-12",
    );
    fs::write(dir.path().join("strict.json"), strict).unwrap();
    let o = run(
        dir.path(),
        &[
            "agreement",
            "--config",
            "strict.json",
            "--checkpoint",
            "out/nn/checkpoint.json",
            "--out",
            "strict",
        ],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL"));

    let after: Vec<Vec<u8>> = ["control_source.csv", "control_target.csv"]
        .iter()
        .map(|n| fs::read(dir.path().join("out").join(n)).unwrap())
        .collect();
    assert_eq!(inputs, after, "inputs were modified");
}

#[test]
fn agreement_on_identical_files_is_zero() {
    let cfg = SMALL.replace(
        "\"output_dir\": \"out\"",
        "\"output_dir\": \"out\", \"schema\": {\"feature_columns\": [\"f0\", \"f1\", \"f2\", \"f3\"], \"label_column\": \"signal\"}",
    );
    let (dir, _) = setup(&cfg);
    synth(dir.path());
    let o = run(
        dir.path(),
        &["train", "--config", "run.json", "--model", "nn"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(
        dir.path(),
        &[
            "agreement",
            "--config",
            "run.json",
            "--checkpoint",
            "out/nn/checkpoint.json",
            "--control-source",
            "out/control_source.csv",
            "--control-target",
            "out/control_source.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/nn/agreement.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["statistic"].as_f64().unwrap(), 0.0);
}

#[test]
fn fingerprint_mismatch_exits_4() {
    let (dir, _) = setup(SMALL);
    synth(dir.path());
    let o = run(
        dir.path(),
        &["train", "--config", "run.json", "--model", "nn"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let other = SMALL.replace("\"output_dir\": \"out\"", "\"output_dir\": \"out\", \"schema\": {\"feature_columns\": [\"f0\", \"f1\", \"f2\"], \"weight_column\": \"weight\"}");
    fs::write(dir.path().join("other.json"), other).unwrap();
    let o = run(
        dir.path(),
        &[
            "agreement",
            "--config",
            "other.json",
            "--checkpoint",
            "out/nn/checkpoint.json",
        ],
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn report_merges_histories() {
    let (dir, _) = setup(SMALL);
    synth(dir.path());
    for model in ["nn", "dann"] {
        let o = run(
            dir.path(),
            &["train", "--config", "run.json", "--model", model],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let args = [
        "report",
        "--out",
        "curves.csv",
        "out/nn/history.csv",
        "out/dann/history.json",
    ];
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read(dir.path().join("curves.csv")).unwrap();
    let text = String::from_utf8_lossy(&first).into_owned();
    assert_eq!(text.lines().next().unwrap(), "model,epoch,metric,value");
    // nn: 3 metrics per epoch, dann: 5.
    assert_eq!(text.lines().count(), 1 + 3 * 3 + 3 * 5);
    assert!(text.lines().any(|l| l.starts_with("nn,")));
    assert!(text.lines().any(|l| l.starts_with("dann,")));
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(dir.path().join("curves.csv")).unwrap(), first);

    fs::write(dir.path().join("bad.csv"), "model,epoch\nnn,1\n").unwrap();
    let o = run(dir.path(), &["report", "--out", "x.csv", "bad.csv"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}
