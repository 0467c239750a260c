//! `pnsx`: generate benchmark data, train a GCN, explain its predictions and
//! score the explanations.

mod config;
mod data;
mod evaluate;
mod explain;
mod generate;
mod manifest;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pnsx::export::{to_dot, ExplanationRecord};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "pnsx", version, about = "Necessary-and-sufficient explanations for graph convolutional networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic benchmark, or convert a TU dataset, to JSON.
    Generate(generate::GenerateArgs),
    /// Train a GCN on a dataset.
    Train(train::TrainArgs),
    /// Explain selected predictions of a trained model.
    Explain(Box<explain::ExplainArgs>),
    /// Score explanation files and write a CSV report.
    Evaluate(evaluate::EvaluateArgs),
    /// Draw one explanation file as a Graphviz graph.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Args)]
struct ExportDotArgs {
    #[arg(long)]
    explanation: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn export_dot(args: ExportDotArgs) -> Result<()> {
    let mut rec = manifest::Recorder::start("export-dot");
    rec.input(&args.explanation);
    let record = ExplanationRecord::read(&args.explanation).with_context(|| format!("parsing {}", args.explanation.display()))?;
    rec.write(&args.out, to_dot(&record))?;
    rec.finish(&manifest::beside(&args.out), json!({}), record.seed, serde_json::Value::Null)?;
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Generate(a) => generate::run(a),
        Command::Train(a) => train::run(a),
        Command::Explain(a) => explain::run(*a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::ExportDot(a) => export_dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
