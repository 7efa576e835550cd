use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand, ValueEnum};
use simreal::commands;
use simreal::config::RunConfig;
use simreal::{CliError, ExitCode};
use simreal_core::train::{LambdaMode, ModelKind};

#[derive(Parser)]
#[command(
    name = "simreal",
    version,
    about = "Domain-adversarial training for simulation-to-real transfer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Nn,
    Dann,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON). Omit to use built-in defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides both `scenario.seed` and `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `train.epochs`.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario.
    Synth(Common),
    /// Train a classifier on the labeled source table.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Model,
    },
    /// Compare classifier outputs on the two control tables.
    Agreement {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Overrides `data.control_source`.
        #[arg(long)]
        control_source: Option<PathBuf>,
        /// Overrides `data.control_target`.
        #[arg(long)]
        control_target: Option<PathBuf>,
        /// Where to write agreement.json and histogram.csv; defaults to the
        /// checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge training histories into one long-format CSV.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        histories: Vec<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &c.output_dir {
        cfg.output_dir = std::env::current_dir().unwrap_or_default().join(dir);
    }
    if let Some(seed) = c.seed {
        cfg.scenario.seed = seed;
        if let Some(t) = cfg.train.as_mut() {
            t.seed = seed;
        }
    }
    if let Some(epochs) = c.epochs {
        match cfg.train.as_mut() {
            Some(t) => t.epochs = epochs,
            None => cfg.train = Some(simreal_core::TrainConfig::with_epochs(epochs)),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Synth(common) => {
            let cfg = load_config(&common)?;
            for p in commands::synth(&cfg)? {
                println!("wrote {}", p.display());
            }
            Ok(ExitCode::Success)
        }
        Command::Train { common, model } => {
            let cfg = load_config(&common)?;
            let model = match model {
                Model::Nn => ModelKind::Nn,
                Model::Dann => ModelKind::Dann,
            };
            let s = commands::train(&cfg, model)?;
            print!(
                "{}: final test accuracy {:.4}",
                s.model.as_str(),
                s.evaluation.source_test_accuracy
            );
            if let Some((mode, value)) = s.lambda {
                let mode = match mode {
                    LambdaMode::Constant => "constant",
                    LambdaMode::GaninSchedule => "ganin_schedule",
                };
                print!(" (lambda {mode}, value {value})");
            }
            println!();
            if let Some(acc) = s.evaluation.target_test_accuracy {
                println!("target accuracy (evaluation only) {acc:.4}");
            }
            println!("wrote {}", s.dir.display());
            Ok(ExitCode::Success)
        }
        Command::Agreement {
            common,
            checkpoint,
            control_source,
            control_target,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            let cwd = std::env::current_dir().unwrap_or_default();
            if let Some(p) = control_source {
                cfg.data.control_source = Some(cwd.join(p));
            }
            if let Some(p) = control_target {
                cfg.data.control_target = Some(cwd.join(p));
            }
            let out = out.unwrap_or_else(|| {
                checkpoint
                    .parent()
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let r = commands::agreement(&cfg, &checkpoint, &out)?;
            println!(
                "ks {:.4} threshold {} -> {}",
                r.statistic,
                r.threshold,
                if r.pass { "PASS" } else { "FAIL" }
            );
            Ok(if r.pass {
                ExitCode::Success
            } else {
                ExitCode::AgreementFail
            })
        }
        Command::Report { out, histories } => {
            let rows = commands::report(&histories, &out)?;
            println!("wrote {} ({rows} rows)", out.display());
            Ok(ExitCode::Success)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    process::exit(code as i32);
}
