//! `retigrade`: lesion masks to symbolic features to DR/DME grades with
//! explanations.

mod commands;
mod config;
mod failure;
mod output;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "retigrade", version, about = "Neuro-symbolic DR/DME grading from lesion masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset (masks, manifest, ground truth)
    Synth(commands::SynthArgs),
    /// Count lesion regions per image into a features CSV
    Extract(commands::ExtractArgs),
    /// Train a grader on a labeled features CSV
    Train(commands::TrainArgs),
    /// Predict DR/DME grades for a features CSV
    Predict(commands::PredictArgs),
    /// Write one explanation sentence per image
    Explain(commands::ExplainArgs),
    /// Score predictions against ground truth
    Evaluate(commands::EvaluateArgs),
    /// Compare simple and extended features on one split
    Ablation(commands::AblationArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Explain(a) => commands::explain(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablation(a) => commands::ablation(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
