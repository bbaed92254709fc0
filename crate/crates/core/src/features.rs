//! Feature-aware PageRank preprocessing.
//!
//! Node features are projected onto a single auxiliary direction orthogonal
//! to their mean direction; sorting nodes by that score and linking each node
//! to its `window_size` successors yields a sparse, connected similarity graph
//! that is merged (element-wise max) into the input digraph. Adding self-loops
//! then gives an irreducible, aperiodic chain, `P_pfpr = D̃⁻¹ Ã`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{self, DegreeVector, DiGraph};
use crate::sparse::{CsrMatrix, DenseMatrix, Duplicates};

/// Residual norm below which a drawn auxiliary vector counts as parallel to
/// the mean direction.
const PARALLEL_TOL: f64 = 1e-12;
const MAX_AUX_ATTEMPTS: usize = 16;

/// `n × d` node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DenseMatrix);

impl FeatureMatrix {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::InvalidParameter("feature dimension must be at least 1".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("ragged feature rows".into()));
        }
        Self::new(DenseMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn has_negative(&self) -> bool {
        self.0.iter().any(|&v| v < 0.0)
    }

    /// Permutes rows so that new row `i` is old row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self(DenseMatrix::from_fn(self.n(), self.dim(), |r, c| self.0[(perm[r], c)]))
    }
}

/// Row-normalized features plus a flag per all-zero row.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFeatures {
    pub matrix: FeatureMatrix,
    pub zero_rows: Vec<bool>,
}

/// Node ordering by similarity to the auxiliary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedIndex {
    /// Permutation of `0..n`, highest score first.
    pub order: Vec<usize>,
    /// Score of each node, indexed by node.
    pub scores: Vec<f64>,
}

/// How the feature-side edges of a combinatorial graph were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    SimilaritySort,
    ExactKnn,
}

/// The augmented graph and its personalized feature-aware transition matrix.
#[derive(Debug, Clone)]
pub struct CombinatorialGraph {
    /// `max(A, A_s)`, no self-loops.
    pub merged: CsrMatrix,
    /// `merged + I`.
    pub augmented: CsrMatrix,
    /// Row sums of `augmented`.
    pub degrees: DegreeVector,
    /// `D̃⁻¹ Ã`.
    pub transition: CsrMatrix,
    /// The feature-side graphs that were merged in (one per sign part for
    /// similarity sorting, one for exact kNN).
    pub feature_graphs: Vec<CsrMatrix>,
    /// Orderings behind each sorting graph (empty for exact kNN).
    pub orderings: Vec<SortedIndex>,
    pub k: usize,
    pub window_size: usize,
    pub seed: u64,
    pub construction: Construction,
}

impl CombinatorialGraph {
    fn assemble(
        merged: CsrMatrix,
        feature_graphs: Vec<CsrMatrix>,
        orderings: Vec<SortedIndex>,
        k: usize,
        seed: u64,
        construction: Construction,
    ) -> Result<Self> {
        let augmented = graph::add_self_loops(&merged)?;
        let degrees = graph::out_degrees(&augmented);
        let transition = graph::row_normalize(&augmented)?;
        Ok(Self {
            merged,
            augmented,
            degrees,
            transition,
            feature_graphs,
            orderings,
            k,
            window_size: k / 2,
            seed,
            construction,
        })
    }

    pub fn n(&self) -> usize {
        self.merged.n_rows()
    }

    pub fn is_irreducible(&self) -> bool {
        graph::is_strongly_connected(&self.augmented)
    }

    /// Adds `d_max − d_i` extra out-edges to every node, walking outward
    /// from its position in the first similarity ordering, so that every row
    /// of the merged adjacency has the same out-degree.
    pub fn regularize_out_degrees(&self) -> Result<Self> {
        let n = self.n();
        let order = match self.orderings.first() {
            Some(o) => o.order.clone(),
            None => (0..n).collect(),
        };
        let mut position = vec![0usize; n];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        let degrees: Vec<usize> = (0..n).map(|i| self.merged.row_nnz(i)).collect();
        let target = degrees.iter().copied().max().unwrap_or(0);
        let mut triplets: Vec<(usize, usize, f64)> = self.merged.triplets().collect();
        for i in 0..n {
            let mut need = target - degrees[i];
            let p = position[i] as isize;
            let mut offset = 1isize;
            while need > 0 && (offset as usize) < n {
                for cand in [p - offset, p + offset] {
                    if need == 0 || cand < 0 || cand as usize >= n {
                        continue;
                    }
                    let j = order[cand as usize];
                    if self.merged.get(i, j) == 0.0 {
                        triplets.push((i, j, 1.0));
                        need -= 1;
                    }
                }
                offset += 1;
            }
        }
        let merged = CsrMatrix::from_triplets(n, n, &triplets, Duplicates::Max)?;
        Self::assemble(
            merged,
            self.feature_graphs.clone(),
            self.orderings.clone(),
            self.k,
            self.seed,
            self.construction,
        )
    }
}

/// Scales every nonzero row to unit Euclidean norm; zero rows stay zero and
/// are flagged.
pub fn l2_normalize_rows(x: &FeatureMatrix) -> NormalizedFeatures {
    let mut m = x.matrix().clone();
    let mut zero_rows = vec![false; x.n()];
    for (i, flag) in zero_rows.iter_mut().enumerate() {
        let norm = m.row(i).norm();
        if norm > 0.0 {
            m.row_mut(i).unscale_mut(norm);
        } else {
            *flag = true;
        }
    }
    NormalizedFeatures { matrix: FeatureMatrix(m), zero_rows }
}

/// Unit vector along the mean of the normalized rows.
pub fn mean_direction(x_hat: &FeatureMatrix) -> Result<Vec<f64>> {
    let n = x_hat.n().max(1) as f64;
    let mean: Vec<f64> = x_hat.matrix().column_iter().map(|c| c.sum() / n).collect();
    let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < PARALLEL_TOL {
        return Err(Error::ZeroMean);
    }
    Ok(mean.iter().map(|v| v / norm).collect())
}

fn orthogonalize(a: &[f64], unit: &[f64]) -> Option<Vec<f64>> {
    let proj: f64 = a.iter().zip(unit).map(|(x, y)| x * y).sum();
    let mut r: Vec<f64> = a.iter().zip(unit).map(|(x, y)| x - proj * y).collect();
    // second pass against cancellation
    let proj2: f64 = r.iter().zip(unit).map(|(x, y)| x * y).sum();
    r.iter_mut().zip(unit).for_each(|(x, y)| *x -= proj2 * y);
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < PARALLEL_TOL {
        return None;
    }
    Some(r.iter().map(|v| v / norm).collect())
}

/// Seeded Gaussian draw projected off `mean_dir` and renormalized. A draw
/// parallel to `mean_dir` is replaced by the draw for `seed + 1`, and so on.
pub fn auxiliary_vector(mean_dir: &[f64], seed: u64) -> Result<Vec<f64>> {
    auxiliary_vector_with(mean_dir, seed, |s| gaussian_draw(mean_dir.len(), s))
}

/// [`auxiliary_vector`] with the initial draw supplied by `draw(seed)`.
pub fn auxiliary_vector_with(mean_dir: &[f64], seed: u64, mut draw: impl FnMut(u64) -> Vec<f64>) -> Result<Vec<f64>> {
    for attempt in 0..MAX_AUX_ATTEMPTS {
        let a = draw(seed.wrapping_add(attempt as u64));
        if let Some(v) = orthogonalize(&a, mean_dir) {
            return Ok(v);
        }
    }
    Err(Error::DegenerateAux { attempts: MAX_AUX_ATTEMPTS })
}

fn gaussian_draw(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Scores each (unit or zero) row by its dot product with `aux` and orders
/// nodes by descending score, ties by ascending node index.
pub fn similarity_sort(x_hat: &FeatureMatrix, aux: &[f64]) -> SortedIndex {
    let a = nalgebra::DVector::from_column_slice(aux);
    let scores: Vec<f64> = (x_hat.matrix() * a).iter().copied().collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    SortedIndex { order, scores }
}

/// Undirected edges between `order[i]` and `order[i + w]` for
/// `w = 1..=window_size` (clamped to `n − 1`), stored in both directions.
pub fn sorting_graph(sorted: &SortedIndex, window_size: usize) -> CsrMatrix {
    let n = sorted.order.len();
    let window = window_size.min(n.saturating_sub(1));
    let mut triplets = Vec::with_capacity(2 * n * window);
    for w in 1..=window {
        for i in 0..n - w {
            let (u, v) = (sorted.order[i], sorted.order[i + w]);
            triplets.push((u, v, 1.0));
            triplets.push((v, u, 1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets, Duplicates::Max).expect("sorting graph indices come from a permutation")
}

/// `X = X⁺ + X⁻` with `X⁺` the positive entries and `X⁻` the negative ones.
pub fn split_signs(x: &FeatureMatrix) -> (FeatureMatrix, FeatureMatrix) {
    let pos = x.matrix().map(|v| if v > 0.0 { v } else { 0.0 });
    let neg = x.matrix().map(|v| if v < 0.0 { v } else { 0.0 });
    (FeatureMatrix(pos), FeatureMatrix(neg))
}

fn sorting_part(x: &FeatureMatrix, window: usize, seed: u64) -> Result<(CsrMatrix, SortedIndex)> {
    let normalized = l2_normalize_rows(x);
    let mean = mean_direction(&normalized.matrix)?;
    let aux = auxiliary_vector(&mean, seed)?;
    let sorted = similarity_sort(&normalized.matrix, &aux);
    Ok((sorting_graph(&sorted, window), sorted))
}

/// Seed offset separating the negative-part auxiliary draw from the positive one.
const NEGATIVE_PART_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Merges the similarity-sorting graph(s) into `g` and builds `P_pfpr`.
///
/// Features with negative entries are split by sign; the negative part is
/// sorted on its absolute values so both parts lie in one orthant. A part
/// with no nonzero entry contributes nothing.
pub fn build_combinatorial(g: &DiGraph, x: &FeatureMatrix, k: usize, seed: u64) -> Result<CombinatorialGraph> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::InvalidK(k));
    }
    if x.n() != g.n() {
        return Err(Error::ShapeMismatch(format!("{} feature rows for {} nodes", x.n(), g.n())));
    }
    let window = k / 2;
    let mut parts = Vec::new();
    if x.has_negative() {
        let (pos, neg) = split_signs(x);
        if pos.matrix().iter().any(|&v| v != 0.0) {
            parts.push(sorting_part(&pos, window, seed)?);
        }
        let abs_neg = FeatureMatrix(neg.matrix().abs());
        parts.push(sorting_part(&abs_neg, window, seed ^ NEGATIVE_PART_STREAM)?);
    } else {
        parts.push(sorting_part(x, window, seed)?);
    }
    let mut merged = g.adjacency().clone();
    for (sg, _) in &parts {
        merged = merged.elementwise_max(sg)?;
    }
    let (graphs, orders): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    let out = CombinatorialGraph::assemble(merged, graphs, orders, k, seed, Construction::SimilaritySort)?;
    debug_assert!(out.is_irreducible());
    Ok(out)
}

/// Exact cosine top-`k` neighbor lists (self excluded, ties by lower index).
pub fn cosine_knn(x: &FeatureMatrix, k: usize) -> Vec<Vec<usize>> {
    let normalized = l2_normalize_rows(x).matrix.into_inner();
    let gram = &normalized * normalized.transpose();
    let n = x.n();
    let k = k.min(n.saturating_sub(1));
    (0..n)
        .map(|i| {
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let cmp = |a: &usize, b: &usize| gram[(i, *b)].total_cmp(&gram[(i, *a)]).then(a.cmp(b));
            if k < cand.len() && k > 0 {
                cand.select_nth_unstable_by(k - 1, cmp);
            }
            cand.truncate(k);
            cand.sort_by(cmp);
            cand
        })
        .collect()
}

/// Merges an exact cosine kNN graph (symmetrized by element-wise max) into
/// `g`. Unlike [`build_combinatorial`] the result need not be irreducible.
pub fn knn_combine(g: &DiGraph, x: &FeatureMatrix, k: usize) -> Result<CombinatorialGraph> {
    if x.n() != g.n() {
        return Err(Error::ShapeMismatch(format!("{} feature rows for {} nodes", x.n(), g.n())));
    }
    let n = g.n();
    let lists = cosine_knn(x, k);
    let triplets: Vec<_> =
        lists.iter().enumerate().flat_map(|(i, l)| l.iter().flat_map(move |&j| [(i, j, 1.0), (j, i, 1.0)])).collect();
    let knn = CsrMatrix::from_triplets(n, n, &triplets, Duplicates::Max)?;
    let merged = g.adjacency().elementwise_max(&knn)?;
    CombinatorialGraph::assemble(merged, vec![knn], Vec::new(), k, 0, Construction::ExactKnn)
}

/// Mean over nodes of the fraction of reference neighbors that also appear
/// as neighbors in `graph`. Nodes with an empty reference list are skipped.
pub fn neighbor_recall(graph: &CsrMatrix, reference: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    let mut counted = 0usize;
    for (i, refs) in reference.iter().enumerate() {
        if refs.is_empty() {
            continue;
        }
        let hits = refs.iter().filter(|&&j| graph.get(i, j) > 0.0).count();
        total += hits as f64 / refs.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}
