use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use diglacian_core::container::save_dense;
use diglacian_core::data::{format_sparse, load_dataset, make_splits, save_dataset, Dataset, DatasetPaths};
use diglacian_core::graph::add_self_loops;
use diglacian_core::markov::{FundamentalMethod, PowerIterationOptions};
use diglacian_core::model::undirected_walk;
use diglacian_core::pipeline::{preprocess, PreprocessConfig, Preprocessed, Variant};

use crate::exit::{self, with_code};
use crate::manifest::Manifest;

pub const COMBINATORIAL: &str = "combinatorial.tsv";
pub const TRANSITION: &str = "transition.tsv";
pub const STATIONARY: &str = "stationary.tsv";
pub const UNDIRECTED: &str = "undirected.tsv";
pub const PROPAGATION: &str = "propagation.tsv";
pub const FUNDAMENTAL: &str = "fundamental.dgl";
pub const HITTING: &str = "hitting.dgl";
pub const COMMUTE: &str = "commute.dgl";
pub const COMMUTE_PROPAGATION: &str = "commute_propagation.tsv";

/// Split ratios (train, validation, test) used when no split file is given.
const DEFAULT_RATIOS: (f64, f64, f64) = (0.48, 0.32, 0.20);
const DEFAULT_SPLITS: usize = 10;

/// Flags that determine the preprocessing result; recorded in the manifest
/// and reused by `train --sweep-k`.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PipelineFlags {
    /// Sorting-graph window; must be a positive even integer.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Chain construction: fpr, knn or no-feat.
    #[arg(long, default_value = "fpr")]
    pub variant: String,
    /// Also compute fundamental, hitting and commute-time matrices.
    #[arg(long)]
    pub commute: bool,
    /// Sparsification ratio for the commute-time propagation matrix.
    #[arg(long, default_value_t = 0.97)]
    pub mu: f64,
    /// Fundamental matrix route: dense, sparse or auto.
    #[arg(long, default_value = "auto")]
    pub fundamental: String,
    /// Power-iteration step cap.
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    /// Power-iteration L1 residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

impl PipelineFlags {
    pub fn config(&self) -> Result<PreprocessConfig> {
        let variant: Variant = self.variant.parse().map_err(|e| with_code(exit::PRECONDITION, e))?;
        let fundamental = match self.fundamental.as_str() {
            "dense" => FundamentalMethod::Dense,
            "sparse" => FundamentalMethod::Sparse,
            "auto" => FundamentalMethod::Auto,
            other => {
                return Err(with_code(exit::PRECONDITION, anyhow::anyhow!("unknown fundamental method {other:?}")));
            }
        };
        Ok(PreprocessConfig {
            k: self.k,
            seed: self.seed,
            variant,
            power: PowerIterationOptions { max_iter: self.max_iter, tol: self.tol },
            commute_mu: self.commute.then_some(self.mu),
            fundamental,
        })
    }
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Split file; when absent, stratified 48/32/20 splits are drawn from the seed.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn write_text(dir: &Path, name: &str, text: &str, written: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    written.push(name.into());
    Ok(())
}

/// Loads a dataset, failing with the parse exit code on bad input.
pub fn load(paths: &DatasetPaths) -> Result<Dataset> {
    let (ds, _) = load_dataset(paths).map_err(|e| with_code(exit::classify(&e), e))?;
    Ok(ds)
}

pub fn run_pipeline(ds: &Dataset, flags: &PipelineFlags) -> Result<Preprocessed> {
    let cfg = flags.config()?;
    preprocess(&ds.graph, &ds.features, &cfg).map_err(|e| with_code(exit::classify(&e), e))
}

pub fn run(args: &PreprocessArgs) -> Result<()> {
    let paths = DatasetPaths {
        edges: args.edges.clone(),
        features: args.features.clone(),
        labels: args.labels.clone(),
        splits: args.splits.clone(),
    };
    if let Some(s) = &args.splits {
        if !s.exists() {
            return Err(with_code(exit::PARSE_ERROR, anyhow::anyhow!("split file {} not found", s.display())));
        }
    }
    let mut ds = load(&paths)?;
    let generated_splits = ds.splits.is_empty();
    if generated_splits {
        match make_splits(&ds.labels, DEFAULT_RATIOS, DEFAULT_SPLITS, args.pipeline.seed) {
            Ok(s) => ds.splits = s,
            Err(e) => log::warn!("no splits written ({e}); supply --splits to train on this dataset"),
        }
    }
    let pre = run_pipeline(&ds, &args.pipeline)?;

    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_dataset(&ds, dir)?;
    let mut written: Vec<String> =
        ["edges.tsv", "features.tsv", "labels.tsv", "splits.json"].into_iter().map(String::from).collect();

    let augmented = match &pre.combinatorial {
        Some(c) => c.augmented.clone(),
        None => add_self_loops(ds.graph.adjacency())?,
    };
    write_text(dir, COMBINATORIAL, &format_sparse(&augmented), &mut written)?;
    write_text(dir, TRANSITION, &format_sparse(&pre.chain.transition), &mut written)?;
    let pi: String = pre.chain.stationary.iter().map(|v| format!("{v}\n")).collect();
    write_text(dir, STATIONARY, &pi, &mut written)?;
    write_text(dir, UNDIRECTED, &format_sparse(&undirected_walk(&pre.structure)?), &mut written)?;
    write_text(dir, PROPAGATION, &format_sparse(&pre.ops.propagation), &mut written)?;
    if let Some(c) = &pre.commute {
        for (name, m) in [(FUNDAMENTAL, &c.fundamental), (HITTING, &c.hitting), (COMMUTE, &c.commute)] {
            save_dense(&dir.join(name), m)?;
            written.push(name.into());
        }
        write_text(dir, COMMUTE_PROPAGATION, &format_sparse(&c.propagation), &mut written)?;
    }

    let flags = json!({
        "edges": args.edges,
        "features": args.features,
        "labels": args.labels,
        "splits": args.splits,
        "pipeline": args.pipeline,
    });
    let mut manifest = Manifest::new("preprocess", flags, args.pipeline.seed);
    manifest.summary = json!({
        "nodes": ds.n(),
        "edges": ds.graph.edge_count(),
        "classes": ds.classes,
        "k": args.pipeline.k,
        "variant": pre.variant,
        "splits": ds.splits.len(),
        "generated_splits": generated_splits,
        "transition_nnz": pre.chain.transition.nnz(),
        "degree_min": pre.chain.degrees.min(),
        "degree_max": pre.chain.degrees.max(),
        "stationary": {
            "iterations": pre.chain.iterations,
            "residual": pre.chain.residual,
            "tolerance_met": pre.chain.residual <= args.pipeline.tol,
            "below_warning_threshold": pre.chain.converged(),
        },
        "commute_mu": pre.commute.as_ref().map(|c| c.mu),
    });
    manifest.artifacts = written;
    manifest.write(dir)?;
    log::info!("wrote {} artifacts to {}", manifest.artifacts.len(), dir.display());
    Ok(())
}
