//! Datasets on disk, the edge homophily ratio, a planted-partition
//! generator and stratified splits.
//!
//! File formats:
//!
//! - edges: one `src<TAB>dst` pair of node indices per line
//! - features: one row of whitespace-separated floats per node
//! - labels: one class index per line
//! - splits: JSON, either one `{"train": [...], "val": [...], "test": [...]}`
//!   object or an array of them
//!
//! Blank lines and lines starting with `#` are skipped in the TSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{DiGraph, EdgeListReport};
use crate::sparse::{CsrMatrix, DenseMatrix, Duplicates};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: DiGraph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.graph.n() != n || self.features.n() != n {
            return Err(Error::InconsistentCounts(format!(
                "{} labels, {} feature rows, {} graph nodes",
                n,
                self.features.n(),
                self.graph.n()
            )));
        }
        for (k, s) in self.splits.iter().enumerate() {
            let mut seen = vec![false; n];
            for &i in s.train.iter().chain(&s.val).chain(&s.test) {
                if i >= n {
                    return Err(Error::InconsistentCounts(format!("split {k} references node {i} of {n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InconsistentCounts(format!("split {k} lists node {i} twice")));
                }
            }
        }
        Ok(())
    }
}

/// Where the four dataset files live.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: Option<PathBuf>,
}

impl DatasetPaths {
    /// The default file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.tsv"),
            features: dir.join("features.tsv"),
            labels: dir.join("labels.tsv"),
            splits: Some(dir.join("splits.json")),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { file: path.display().to_string(), line, msg: msg.into() }
}

pub fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(ln, l)| {
            let mut it = l.split_whitespace();
            let mut next = || -> Result<usize> {
                let tok = it.next().ok_or_else(|| parse_err(path, ln, "expected two node indices"))?;
                tok.parse().map_err(|_| parse_err(path, ln, format!("bad node index {tok:?}")))
            };
            let e = (next()?, next()?);
            if it.next().is_some() {
                return Err(parse_err(path, ln, "trailing fields"));
            }
            Ok(e)
        })
        .collect()
}

pub fn parse_features(path: &Path) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, l) in data_lines(&text) {
        let row = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(path, ln, format!("bad number {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(path, ln, format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(path, ln, "non-finite feature"));
        }
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows)
}

pub fn parse_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    data_lines(&text).map(|(ln, l)| l.parse().map_err(|_| parse_err(path, ln, format!("bad label {l:?}")))).collect()
}

pub fn parse_splits(path: &Path) -> Result<Vec<Split>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Split),
        Many(Vec<Split>),
    }
    let text = read(path)?;
    match serde_json::from_str::<OneOrMany>(&text) {
        Ok(OneOrMany::One(s)) => Ok(vec![s]),
        Ok(OneOrMany::Many(v)) => Ok(v),
        Err(e) => Err(parse_err(path, e.line(), e.to_string())),
    }
}

/// Loads and validates a dataset. Duplicate edges and self-loops are dropped
/// and counted in the report.
pub fn load_dataset(paths: &DatasetPaths) -> Result<(Dataset, EdgeListReport)> {
    let labels = parse_labels(&paths.labels)?;
    let features = parse_features(&paths.features)?;
    let n = labels.len();
    if features.n() != n {
        return Err(Error::InconsistentCounts(format!("{} feature rows for {n} labels", features.n())));
    }
    let edges = parse_edges(&paths.edges)?;
    let (graph, report) = DiGraph::from_edges(n, &edges)?;
    if report.duplicates > 0 || report.self_loops > 0 {
        log::warn!("dropped {} duplicate edges and {} self-loops", report.duplicates, report.self_loops);
    }
    let splits = match &paths.splits {
        Some(p) if p.exists() => parse_splits(p)?,
        _ => Vec::new(),
    };
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let ds = Dataset { graph, features, labels, classes, splits };
    ds.validate()?;
    Ok((ds, report))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes the dataset into `dir` under the default file names.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<DatasetPaths> {
    fs::create_dir_all(dir)?;
    let paths = DatasetPaths::in_dir(dir);
    let mut s = String::new();
    for (a, b) in ds.graph.edges() {
        writeln!(s, "{a}\t{b}").expect("string write");
    }
    write(&paths.edges, &s)?;
    write(&paths.features, &format_dense(ds.features.matrix()))?;
    s.clear();
    for y in &ds.labels {
        writeln!(s, "{y}").expect("string write");
    }
    write(&paths.labels, &s)?;
    let json = serde_json::to_string_pretty(&ds.splits).map_err(|e| Error::Io(e.to_string()))?;
    write(paths.splits.as_ref().expect("default paths include splits"), &(json + "\n"))?;
    Ok(paths)
}

/// Tab-separated rows using the shortest round-trip float representation.
pub fn format_dense(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                s.push('\t');
            }
            write!(s, "{}", m[(r, c)]).expect("string write");
        }
        s.push('\n');
    }
    s
}

/// `row<TAB>col<TAB>value` triplets preceded by a `# rows cols` header.
pub fn format_sparse(m: &CsrMatrix) -> String {
    let mut s = format!("# {} {}\n", m.n_rows(), m.n_cols());
    for (r, c, v) in m.triplets() {
        writeln!(s, "{r}\t{c}\t{v}").expect("string write");
    }
    s
}

pub fn parse_sparse(path: &Path) -> Result<CsrMatrix> {
    let text = read(path)?;
    let header = text.lines().next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let dims: Vec<usize> = header
        .trim_start_matches('#')
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(path, 1, "bad header")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(parse_err(path, 1, "header must be `# rows cols`"));
    }
    let mut t = Vec::new();
    for (ln, l) in data_lines(&text) {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(path, ln, "expected row, col, value"));
        }
        let r = f[0].parse().map_err(|_| parse_err(path, ln, "bad row"))?;
        let c = f[1].parse().map_err(|_| parse_err(path, ln, "bad column"))?;
        let v = f[2].parse().map_err(|_| parse_err(path, ln, "bad value"))?;
        t.push((r, c, v));
    }
    CsrMatrix::from_triplets(dims[0], dims[1], &t, Duplicates::Sum)
}

/// Fraction of directed edges whose endpoints share a label.
pub fn edge_homophily(g: &DiGraph, labels: &[usize]) -> Result<f64> {
    if labels.len() != g.n() {
        return Err(Error::InconsistentCounts(format!("{} labels for {} nodes", labels.len(), g.n())));
    }
    let total = g.edge_count();
    if total == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let same = g.edges().filter(|&(a, b)| labels[a] == labels[b]).count();
    Ok(same as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub classes: usize,
    /// Target edge homophily in `[0, 1]`.
    pub homophily: f64,
    pub mean_degree: f64,
    pub dim: usize,
    /// Length of the class mean vectors.
    pub snr: f64,
    pub n_splits: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n: 1000, classes: 5, homophily: 0.5, mean_degree: 5.0, dim: 64, snr: 1.0, n_splits: 10, seed: 0 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.classes < 2 || self.n < self.classes {
            return bad(format!("need n ≥ classes ≥ 2, got n = {}, classes = {}", self.n, self.classes));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad(format!("homophily {} outside [0, 1]", self.homophily));
        }
        if !(self.mean_degree > 0.0 && self.mean_degree.is_finite()) || self.dim == 0 || !self.snr.is_finite() {
            return bad("mean degree, dimension and snr must be positive and finite".into());
        }
        let min_class = self.n / self.classes;
        if self.homophily > 0.0 && min_class < 2 {
            return bad("classes need at least two members for intra-class edges".into());
        }
        if self.mean_degree >= (self.n - 1) as f64 {
            return bad("mean degree exceeds n − 1".into());
        }
        Ok(())
    }
}

/// Directed planted-partition graph with Gaussian class-conditional features.
///
/// Labels are balanced and shuffled. Each edge picks a uniform source; with
/// probability `homophily` the target is a uniform other member of the same
/// class, otherwise a uniform member of a uniform other class. Features are
/// `snr · e_{c mod dim}` plus standard normal noise.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let mut labels: Vec<usize> = (0..n).map(|i| i % cfg.classes).collect();
    labels.shuffle(&mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }

    let target = (cfg.mean_degree * n as f64).round() as usize;
    let mut edges = std::collections::BTreeSet::new();
    let mut attempts = 0usize;
    while edges.len() < target && attempts < 50 * target {
        attempts += 1;
        let src = rng.random_range(0..n);
        let y = labels[src];
        let dst = if rng.random::<f64>() < cfg.homophily {
            let pool = &members[y];
            let d = pool[rng.random_range(0..pool.len())];
            if d == src {
                continue;
            }
            d
        } else {
            let mut other = rng.random_range(0..cfg.classes - 1);
            if other >= y {
                other += 1;
            }
            let pool = &members[other];
            pool[rng.random_range(0..pool.len())]
        };
        edges.insert((src, dst));
    }
    let edges: Vec<_> = edges.into_iter().collect();
    let (graph, _) = DiGraph::from_edges(n, &edges)?;

    let x = DenseMatrix::from_fn(n, cfg.dim, |i, c| {
        let noise: f64 = StandardNormal.sample(&mut rng);
        let mean = if c == labels[i] % cfg.dim { cfg.snr } else { 0.0 };
        mean + noise
    });
    let features = FeatureMatrix::new(x)?;
    let splits =
        if cfg.n_splits > 0 { make_splits(&labels, (0.48, 0.32, 0.20), cfg.n_splits, cfg.seed)? } else { Vec::new() };
    Ok(Dataset { graph, features, labels, classes: cfg.classes, splits })
}

/// Per-class stratified splits. Each class contributes `round(r·size)` nodes
/// to train and validation and the rest to test; every part must be non-empty.
pub fn make_splits(labels: &[usize], ratios: (f64, f64, f64), n_splits: usize, seed: u64) -> Result<Vec<Split>> {
    let (a, b, c) = ratios;
    if a < 0.0 || b < 0.0 || c < 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    let mut out = Vec::with_capacity(n_splits);
    for k in 0..n_splits {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
        for (class, pool) in members.iter().enumerate() {
            if pool.is_empty() {
                continue;
            }
            let size = pool.len();
            let n_train = (a * size as f64).round() as usize;
            let n_val = ((b * size as f64).round() as usize).min(size - n_train.min(size));
            if n_train == 0 || n_val == 0 || n_train + n_val >= size {
                return Err(Error::ClassTooSmall { class, size });
            }
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rng);
            split.train.extend_from_slice(&shuffled[..n_train]);
            split.val.extend_from_slice(&shuffled[n_train..n_train + n_val]);
            split.test.extend_from_slice(&shuffled[n_train + n_val..]);
        }
        split.train.sort_unstable();
        split.val.sort_unstable();
        split.test.sort_unstable();
        out.push(split);
    }
    Ok(out)
}
