//! `vesselmatch`: synthetic data, graph extraction, training, inference,
//! evaluation and explanations for arterial-tree labeling.

mod commands;
mod config;
mod dataset;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::CliResult;

#[derive(Parser)]
#[command(
    name = "vesselmatch",
    version,
    about = "Label coronary artery segments by matching against templates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset
    Synth(commands::SynthArgs),
    /// Build segment graphs from binary vessel masks
    Extract(commands::ExtractArgs),
    /// Train matching weights on labeled graphs
    Train(commands::TrainArgs),
    /// Write untrained weights (identical to `train --steps 0`)
    Init(commands::InitArgs),
    /// Label test graphs by voting over templates
    Infer(commands::InferArgs),
    /// Metrics for a predictions file
    Eval(commands::EvalArgs),
    /// Metrics under random leaf-segment removal
    Robustness(commands::RobustnessArgs),
    /// Greedy feature-importance ranking
    ExplainFeatures(commands::ExplainFeaturesArgs),
    /// Greedy template-node importance for one pair
    ExplainNodes(commands::ExplainNodesArgs),
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Init(a) => commands::init(a),
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::ExplainFeatures(a) => commands::explain_features(a),
        Command::ExplainNodes(a) => commands::explain_nodes(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
