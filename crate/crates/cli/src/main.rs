use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod manifest;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ccrf-rerank", version, about = "Graph denoising and diffusion re-ranking for image retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set graph.k=20`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build the mutual k-NN affinity graph.
    BuildGraph,
    /// Refine the k-NN graph with clique CRFs.
    Denoise,
    /// Diffuse every query over an affinity graph and write rankings.
    Rerank,
    /// Score a rankings file against the protocol.
    Eval,
    /// Run the pipeline over a range of k or clique sizes.
    Sweep,
    /// Write a synthetic two-manifold benchmark.
    GenSynth,
    /// Compare weight-kernel variants of the denoiser.
    Ablation,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::BuildGraph => "build-graph",
            Command::Denoise => "denoise",
            Command::Rerank => "rerank",
            Command::Eval => "eval",
            Command::Sweep => "sweep",
            Command::GenSynth => "gen-synth",
            Command::Ablation => "ablation",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("ccrf-rerank: config: {err:#}");
            process::exit(2);
        }
    };
    let result = match cli.command {
        Command::BuildGraph => commands::build_graph(&cfg),
        Command::Denoise => commands::denoise(&cfg),
        Command::Rerank => commands::rerank(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Sweep => commands::sweep_cmd(&cfg),
        Command::GenSynth => commands::gen_synth(&cfg),
        Command::Ablation => commands::ablation(&cfg),
    };
    if let Err(err) = result {
        eprintln!("ccrf-rerank: {}: {err:#}", cli.command.name());
        process::exit(1);
    }
}
