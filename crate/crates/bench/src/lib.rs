//! Shared inputs for the criterion benchmarks in `benches/`.

use diglacian_core::data::{generate_synthetic, Dataset, SynthConfig};
use diglacian_core::pipeline::{preprocess, PreprocessConfig, Preprocessed};

/// Planted-partition dataset of `n` nodes, mean degree 5, 64 features.
pub fn dataset(n: usize) -> Dataset {
    let cfg = SynthConfig { n, classes: 5, homophily: 0.3, mean_degree: 5.0, dim: 64, snr: 2.0, n_splits: 1, seed: 7 };
    generate_synthetic(&cfg).expect("benchmark dataset")
}

pub fn preprocessed(ds: &Dataset, commute_mu: Option<f64>) -> Preprocessed {
    let cfg = PreprocessConfig { commute_mu, ..PreprocessConfig::default() };
    preprocess(&ds.graph, &ds.features, &cfg).expect("benchmark preprocessing")
}
