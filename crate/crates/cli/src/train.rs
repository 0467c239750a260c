use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pnsx::train::{curve_csv, train, TrainConfig};
use serde_json::json;

use crate::config::{overlay, ConfigFile};
use crate::data::load_dataset;
use crate::manifest::{beside, Recorder};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset JSON written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Start from a dataset's published hyperparameters.
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with an optional `preset` and a `[train]` table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Model JSON; the curve and manifest are written next to it.
    #[arg(long)]
    out: PathBuf,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let file = ConfigFile::read(self.config.as_deref())?;
        let seed = self.seed.unwrap_or_default();
        let base = match file.preset(self.preset.as_deref())? {
            Some(p) => p.train_config(seed),
            None => TrainConfig { seed, ..TrainConfig::default() },
        };
        let mut cfg: TrainConfig = overlay(&base, file.train.as_ref())?;
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.epochs = self.epochs.unwrap_or(cfg.epochs);
        cfg.learning_rate = self.lr.unwrap_or(cfg.learning_rate);
        cfg.dropout = self.dropout.unwrap_or(cfg.dropout);
        cfg.weight_decay = self.weight_decay.unwrap_or(cfg.weight_decay);
        cfg.train_fraction = self.train_fraction.unwrap_or(cfg.train_fraction);
        cfg.restarts = self.restarts.unwrap_or(cfg.restarts);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(args: TrainArgs) -> Result<()> {
    let cfg = args.config()?;
    let mut rec = Recorder::start("train");
    rec.input(&args.data);
    if let Some(c) = &args.config {
        rec.input(c);
    }
    let dataset = load_dataset(&args.data)?;
    let report = train(&dataset, &cfg)?;
    rec.write(&args.out, report.params.to_json()?)?;
    rec.write(&args.out.with_extension("curve.csv"), curve_csv(&report.curve))?;
    eprintln!("train accuracy {:.4}, test accuracy {:.4}", report.train_acc, report.test_acc);
    let results = json!({
        "train_acc": report.train_acc,
        "test_acc": report.test_acc,
        "final_loss": report.curve.last().map(|s| s.loss),
    });
    rec.finish(&beside(&args.out), serde_json::to_value(&cfg)?, cfg.seed, results)?;
    Ok(())
}
