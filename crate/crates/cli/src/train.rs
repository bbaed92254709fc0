use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use diglacian_core::data::{parse_sparse, Dataset, DatasetPaths};
use diglacian_core::model::{directed_walk, evaluate, gcn_normalize, train, undirected_walk};
use diglacian_core::{ModelKind, PropagationSet, TrainConfig};

use crate::exit::{self, with_code};
use crate::manifest::{write_json, Manifest};
use crate::preprocess::{self, PipelineFlags, COMMUTE_PROPAGATION, PROPAGATION, UNDIRECTED};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory written by `dgl preprocess`.
    #[arg(long)]
    pub artifacts: PathBuf,
    /// diglacian, diglacian-ct, adasage, gcn or mlp.
    #[arg(long, default_value = "diglacian")]
    pub model: String,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 500)]
    pub patience: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    /// Train on this split only; default is every split.
    #[arg(long)]
    pub split_index: Option<usize>,
    /// Base seed; split `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-preprocess with each of these k values and report accuracy per k.
    #[arg(long, value_delimiter = ',')]
    pub sweep_k: Vec<usize>,
    /// CSV destination for the sweep; stdout when absent.
    #[arg(long)]
    pub sweep_csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct SplitMetrics {
    pub split: usize,
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_trajectory: Vec<f64>,
    pub beta_trajectory: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub model: ModelKind,
    pub artifacts: PathBuf,
    pub config: TrainConfig,
    pub splits: Vec<SplitMetrics>,
    pub mean_test_accuracy: f64,
    /// Population standard deviation across splits.
    pub std_test_accuracy: f64,
    pub wall_time_seconds: f64,
}

fn missing(path: &Path, why: &str) -> anyhow::Error {
    with_code(exit::MISSING_ARTIFACTS, anyhow::anyhow!("{} not found ({why})", path.display()))
}

fn load_operator(dir: &Path, name: &str, why: &str) -> Result<diglacian_core::CsrMatrix> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(missing(&path, why));
    }
    parse_sparse(&path).map_err(|e| with_code(exit::classify(&e), e))
}

/// Propagation matrices from the artifact directory; the raw-graph
/// operators are rebuilt from the stored edge list.
fn propagation(kind: ModelKind, dir: &Path, ds: &Dataset) -> Result<PropagationSet> {
    let set = match kind {
        ModelKind::Diglacian => PropagationSet::mixed(
            load_operator(dir, UNDIRECTED, "run preprocess")?,
            load_operator(dir, PROPAGATION, "run preprocess")?,
        ),
        ModelKind::DiglacianCt => PropagationSet::mixed(
            load_operator(dir, UNDIRECTED, "run preprocess")?,
            load_operator(dir, COMMUTE_PROPAGATION, "run preprocess with --commute")?,
        ),
        ModelKind::AdaSage => {
            let a = ds.graph.adjacency();
            PropagationSet::mixed(undirected_walk(a)?, directed_walk(a))
        }
        ModelKind::Gcn => PropagationSet::gcn(gcn_normalize(ds.graph.adjacency())?),
        ModelKind::Mlp => Ok(PropagationSet::none()),
    };
    set.map_err(|e| with_code(exit::PRECONDITION, e))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn train_splits(
    kind: ModelKind,
    ds: &Dataset,
    props: &PropagationSet,
    cfg: &TrainConfig,
    only: Option<usize>,
) -> Result<Vec<SplitMetrics>> {
    if ds.splits.is_empty() {
        return Err(with_code(exit::MISSING_ARTIFACTS, anyhow::anyhow!("artifact directory has no splits")));
    }
    let indices: Vec<usize> = match only {
        Some(i) if i >= ds.splits.len() => {
            return Err(with_code(
                exit::PRECONDITION,
                anyhow::anyhow!("split index {i} out of range ({} splits)", ds.splits.len()),
            ));
        }
        Some(i) => vec![i],
        None => (0..ds.splits.len()).collect(),
    };
    let x = ds.features.matrix();
    indices
        .into_iter()
        .map(|i| {
            let split = &ds.splits[i];
            let run = TrainConfig { seed: cfg.seed.wrapping_add(i as u64), ..*cfg };
            let out = train(kind, x, props, &ds.labels, ds.classes, &split.train, &split.val, &run)
                .map_err(|e| with_code(exit::PRECONDITION, e))?;
            let test_accuracy = evaluate(kind, x, props, &out.params, &ds.labels, &split.test)?;
            log::info!("{kind} split {i}: test accuracy {test_accuracy:.4} (best epoch {})", out.best_epoch);
            Ok(SplitMetrics {
                split: i,
                test_accuracy,
                val_accuracy: out.best_val_acc,
                best_epoch: out.best_epoch,
                epochs_run: out.history.len(),
                alpha: out.params.alpha,
                beta: out.params.beta,
                alpha_trajectory: out.history.iter().map(|h| h.alpha).collect(),
                beta_trajectory: out.history.iter().map(|h| h.beta).collect(),
            })
        })
        .collect()
}

fn sweep(args: &TrainArgs, kind: ModelKind, ds: &Dataset, manifest: &Manifest, cfg: &TrainConfig) -> Result<()> {
    let base: PipelineFlags =
        serde_json::from_value(manifest.flags["pipeline"].clone()).context("manifest lacks preprocessing flags")?;
    let mut csv = String::from("k,model,mean_test_accuracy,std_test_accuracy,splits\n");
    for &k in &args.sweep_k {
        let flags = PipelineFlags { k, commute: base.commute || kind == ModelKind::DiglacianCt, ..base.clone() };
        let pre = preprocess::run_pipeline(ds, &flags)?;
        let props = pre.propagation(kind, &ds.graph).map_err(|e| with_code(exit::PRECONDITION, e))?;
        let splits = train_splits(kind, ds, &props, cfg, args.split_index)?;
        let accs: Vec<f64> = splits.iter().map(|s| s.test_accuracy).collect();
        let (mean, std) = mean_std(&accs);
        writeln!(csv, "{k},{kind},{mean},{std},{}", accs.len()).expect("string write");
    }
    match &args.sweep_csv {
        Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let kind: ModelKind = args.model.parse().map_err(|e| with_code(exit::PRECONDITION, e))?;
    let cfg = TrainConfig {
        layers: args.layers,
        hidden: args.hidden,
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        dropout: args.dropout,
        patience: args.patience,
        max_epochs: args.max_epochs,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| with_code(exit::PRECONDITION, e))?;

    let dir = &args.artifacts;
    let manifest_path = dir.join(crate::manifest::MANIFEST);
    if !manifest_path.exists() {
        return Err(missing(&manifest_path, "run preprocess first"));
    }
    let manifest = Manifest::read(dir)?;
    let paths = DatasetPaths::in_dir(dir);
    for p in [&paths.edges, &paths.features, &paths.labels] {
        if !p.exists() {
            return Err(missing(p, "incomplete artifact directory"));
        }
    }
    let ds = preprocess::load(&paths)?;

    if !args.sweep_k.is_empty() {
        return sweep(args, kind, &ds, &manifest, &cfg);
    }

    let start = Instant::now();
    let props = propagation(kind, dir, &ds)?;
    let splits = train_splits(kind, &ds, &props, &cfg, args.split_index)?;
    let accs: Vec<f64> = splits.iter().map(|s| s.test_accuracy).collect();
    let (mean, std) = mean_std(&accs);
    let metrics = Metrics {
        model: kind,
        artifacts: dir.clone(),
        config: cfg,
        splits,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    match &args.out {
        Some(p) => write_json(p, &metrics)?,
        None => println!("{}", serde_json::to_string_pretty(&metrics)?),
    }
    eprintln!("{kind}: test accuracy {:.2} ± {:.2} over {} split(s)", 100.0 * mean, 100.0 * std, accs.len());
    Ok(())
}
