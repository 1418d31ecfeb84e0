//! `docflow`: run the document clustering pipeline stage by stage.
//!
//! Exit status is 0 on success, 1 for usage or configuration errors and 2 for
//! data errors (missing or malformed inputs, failed stages).

mod config;
mod stages;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::{PipelineConfig, UsageError};
use crate::stages::{run_stage, Stage};
use crate::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(
    name = "docflow",
    version,
    about = "Cluster long documents by TF-IDF pooled transformer embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct StageArgs {
    /// Pipeline configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Workspace directory for artifacts; overrides `paths.workspace`.
    #[arg(long, env = "DOCFLOW_WORKSPACE")]
    workspace: Option<PathBuf>,
    /// Seed for masking, k-means and projection; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the configuration and print it with every default filled in.
    Validate(StageArgs),
    /// Read and clean the corpus.
    Ingest(StageArgs),
    /// Tokenize, slot and mask the cleaned corpus for model adaptation.
    PrepareTraining(StageArgs),
    /// Embed token windows, merge overlaps and pool one vector per document.
    EmbedMergePool(StageArgs),
    /// Choose K by the elbow method and fit k-means.
    Cluster(StageArgs),
    /// Score clusters with pairwise and centroid cosine similarity.
    Evaluate(StageArgs),
    /// Project document vectors to 2-D with t-SNE.
    Project(StageArgs),
    /// Measure embedding throughput in documents per minute.
    Bench(StageArgs),
    /// Run ingest through project in order.
    All(StageArgs),
}

fn load(args: &StageArgs) -> Result<(PipelineConfig, Workspace)> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.apply_seed(seed);
    }
    let dir = args
        .workspace
        .clone()
        .unwrap_or_else(|| config.paths.workspace.clone());
    Ok((config, Workspace::open(&dir)?))
}

fn run(cli: Cli) -> Result<()> {
    let (args, stages): (&StageArgs, &[Stage]) = match &cli.command {
        Command::Validate(args) => {
            let mut config = PipelineConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                config.apply_seed(seed);
            }
            print!("{}", config.echo()?);
            return Ok(());
        }
        Command::Ingest(a) => (a, &[Stage::Ingest]),
        Command::PrepareTraining(a) => (a, &[Stage::PrepareTraining]),
        Command::EmbedMergePool(a) => (a, &[Stage::EmbedMergePool]),
        Command::Cluster(a) => (a, &[Stage::Cluster]),
        Command::Evaluate(a) => (a, &[Stage::Evaluate]),
        Command::Project(a) => (a, &[Stage::Project]),
        Command::Bench(a) => (a, &[Stage::Bench]),
        Command::All(a) => (a, &Stage::PIPELINE),
    };
    let (config, ws) = load(args)?;
    let _lock = ws.lock()?;
    for &stage in stages {
        run_stage(stage, &config, &ws)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
