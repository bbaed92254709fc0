//! `dgl`: preprocessing, training, verification and synthetic data for the
//! diglacian toolkit.

mod exit;
mod manifest;
mod preprocess;
mod synth;
mod train;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "dgl", version, about = "Directed-graph spectral toolkit and node classifiers")]
struct Cli {
    /// Run numeric kernels on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the combinatorial graph, chain, operators and (optionally)
    /// commute-time artifacts for a dataset.
    Preprocess(preprocess::PreprocessArgs),
    /// Train a model on preprocessed artifacts and report test accuracy.
    Train(train::TrainArgs),
    /// Run the oracle cross-check suite.
    Verify(verify::VerifyArgs),
    /// Write a planted-partition dataset.
    Synth(synth::SynthArgs),
    /// Edge homophily ratio of a labelled edge list.
    Homophily(HomophilyArgs),
}

#[derive(Args, Debug)]
struct HomophilyArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

fn homophily(args: &HomophilyArgs) -> anyhow::Result<()> {
    use diglacian_core::data::{edge_homophily, parse_edges, parse_labels};
    let labels = parse_labels(&args.labels)?;
    let edges = parse_edges(&args.edges)?;
    let (g, report) = diglacian_core::DiGraph::from_edges(labels.len(), &edges)?;
    let h = edge_homophily(&g, &labels)?;
    let out = serde_json::json!({
        "homophily": h,
        "nodes": g.n(),
        "edges": g.edge_count(),
        "dropped_duplicates": report.duplicates,
        "dropped_self_loops": report.self_loops,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn configure_threads(deterministic: bool) -> anyhow::Result<()> {
    let cap = match std::env::var("DGL_THREADS") {
        Ok(v) => Some(v.parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
            exit::with_code(exit::PARSE_ERROR, anyhow::anyhow!("DGL_THREADS must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    let threads = if deterministic { Some(1) } else { cap };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads(cli.deterministic)?;
    match &cli.command {
        Command::Preprocess(a) => preprocess::run(a),
        Command::Train(a) => train::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Homophily(a) => homophily(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit::code_of(&e);
            if code != exit::VERIFY_FAILED {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code as u8)
        }
    }
}
