//! Directed graphs and the structural primitives the spectral pipeline needs:
//! degrees, self-loop augmentation, symmetrization, row normalization, and
//! irreducibility / aperiodicity checks.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, Duplicates};

/// Per-node out-degree (the diagonal of a degree matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn inverse(&self) -> Vec<f64> {
        self.0.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Counters reported while building a graph from a raw edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeListReport {
    pub duplicates: usize,
    pub self_loops: usize,
}

/// Unweighted directed graph stored as a CSR out-adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct DiGraph {
    adjacency: CsrMatrix,
}

impl DiGraph {
    /// Builds a binary graph from an edge list. Duplicate edges collapse and
    /// self-loops are dropped; both are counted in the report.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<(Self, EdgeListReport)> {
        let mut report = EdgeListReport::default();
        let mut triplets = Vec::with_capacity(edges.len());
        for &(s, d) in edges {
            if s >= n || d >= n {
                return Err(Error::InconsistentCounts(format!("edge ({s}, {d}) references a node outside 0..{n}")));
            }
            if s == d {
                report.self_loops += 1;
                continue;
            }
            triplets.push((s, d, 1.0));
        }
        let adjacency = CsrMatrix::from_triplets(n, n, &triplets, Duplicates::Max)?;
        report.duplicates = triplets.len() - adjacency.nnz();
        Ok((Self { adjacency }, report))
    }

    /// Wraps an existing square adjacency with non-negative finite weights.
    pub fn from_adjacency(adjacency: CsrMatrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::ShapeMismatch("adjacency must be square".into()));
        }
        if adjacency.values().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter("negative edge weight".into()));
        }
        Ok(Self { adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.n_rows()
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().iter().filter(|&&v| v > 0.0).count()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.triplets().filter(|t| t.2 > 0.0).map(|(r, c, _)| (r, c))
    }

    pub fn has_self_loops(&self) -> bool {
        self.adjacency.diagonal().iter().any(|&v| v > 0.0)
    }
}

pub fn out_degrees(a: &CsrMatrix) -> DegreeVector {
    DegreeVector(a.row_sums())
}

/// `A + I`. Applying it twice adds 2 to the diagonal.
pub fn add_self_loops(a: &CsrMatrix) -> Result<CsrMatrix> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("add_self_loops needs a square matrix".into()));
    }
    a.add_diagonal(&vec![1.0; a.n_rows()])
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &CsrMatrix) -> Result<CsrMatrix> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch("symmetrize needs a square matrix".into()));
    }
    a.linear_combination(0.5, &a.transpose(), 0.5)
}

/// `D⁻¹ A`; every row must carry positive weight.
pub fn row_normalize(a: &CsrMatrix) -> Result<CsrMatrix> {
    let sums = a.row_sums();
    if let Some(i) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::DeadEndRow(i));
    }
    let inv: Vec<f64> = sums.iter().map(|s| 1.0 / s).collect();
    Ok(a.scale(&inv, &vec![1.0; a.n_cols()]))
}

/// Like [`row_normalize`] but leaves empty rows as zero rows.
pub fn row_normalize_lenient(a: &CsrMatrix) -> CsrMatrix {
    let inv: Vec<f64> = a.row_sums().iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
    a.scale(&inv, &vec![1.0; a.n_cols()])
}

/// Strongly connected components (iterative Tarjan). Components are returned
/// in reverse topological order of the condensation.
pub fn strongly_connected_components(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.n_rows();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0usize;
    // (node, position within its row)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, a.indptr()[root]));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, start)) = call.last() {
            let end = a.indptr()[v + 1];
            let mut pos = start;
            let mut child = None;
            while pos < end {
                let w = a.indices()[pos];
                let weight = a.values()[pos];
                pos += 1;
                if weight <= 0.0 {
                    continue;
                }
                if index[w] == UNSEEN {
                    child = Some(w);
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            call.last_mut().unwrap().1 = pos;
            if let Some(w) = child {
                index[w] = counter;
                low[w] = counter;
                counter += 1;
                stack.push(w);
                on_stack[w] = true;
                call.push((w, a.indptr()[w]));
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

pub fn is_strongly_connected(a: &CsrMatrix) -> bool {
    a.n_rows() > 0 && strongly_connected_components(a).len() == 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whether the gcd of all cycle lengths is one. Requires strong connectivity.
pub fn is_aperiodic(a: &CsrMatrix) -> Result<bool> {
    Ok(period(a)? == 1)
}

/// Period of an irreducible graph: gcd over edges `u → v` of
/// `level(u) + 1 − level(v)` for BFS levels from node 0.
pub fn period(a: &CsrMatrix) -> Result<usize> {
    if !is_strongly_connected(a) {
        return Err(Error::NotIrreducible);
    }
    if a.diagonal().iter().any(|&v| v > 0.0) {
        return Ok(1);
    }
    let n = a.n_rows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for (v, w) in a.row(u) {
            if w > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for (u, v, w) in a.triplets() {
        if w > 0.0 {
            let diff = (level[u] + 1) as i64 - level[v] as i64;
            g = gcd(g, diff.unsigned_abs() as usize);
        }
    }
    // A single node without a self-loop has no cycles at all.
    Ok(g)
}

/// Longest shortest-path distance over ordered pairs (BFS from every node).
/// `None` when some pair is unreachable.
pub fn diameter(a: &CsrMatrix) -> Option<usize> {
    let n = a.n_rows();
    let mut worst = 0;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        let mut seen = 1;
        while let Some(u) = queue.pop_front() {
            for (v, w) in a.row(u) {
                if w > 0.0 && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    worst = worst.max(dist[v]);
                    seen += 1;
                    queue.push_back(v);
                }
            }
        }
        if seen < n {
            return None;
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::DenseMatrix;

    fn m(rows: &[&[f64]]) -> CsrMatrix {
        let d = DenseMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]);
        CsrMatrix::from_dense(&d)
    }

    fn dense(a: &CsrMatrix) -> Vec<Vec<f64>> {
        let d = a.to_dense();
        (0..d.nrows()).map(|r| d.row(r).iter().copied().collect()).collect()
    }

    #[test]
    fn degrees() {
        assert_eq!(out_degrees(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).0, vec![1.0, 0.0]);
        assert_eq!(out_degrees(&CsrMatrix::zeros(3, 3)).0, vec![0.0; 3]);
        assert_eq!(out_degrees(&m(&[&[1.0, 1.0], &[1.0, 0.0]])).0, vec![2.0, 1.0]);
    }

    #[test]
    fn self_loops_add_identity() {
        let z = add_self_loops(&CsrMatrix::zeros(2, 2)).unwrap();
        assert_eq!(dense(&z), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = add_self_loops(&m(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(dense(&a), vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
        let twice = add_self_loops(&add_self_loops(&CsrMatrix::zeros(2, 2)).unwrap()).unwrap();
        assert_eq!(twice.diagonal(), vec![2.0, 2.0]);
    }

    #[test]
    fn symmetrize_examples() {
        let s = symmetrize(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(dense(&s), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        let sym = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(symmetrize(&sym).unwrap(), sym);
        let s = symmetrize(&m(&[&[0.0, 2.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(dense(&s), vec![vec![0.0, 1.5], vec![1.5, 0.0]]);
        assert!(s.is_symmetric());
    }

    #[test]
    fn row_normalize_examples() {
        let p = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(row_normalize(&p).unwrap(), p);
        let q = row_normalize(&m(&[&[1.0, 1.0], &[0.0, 2.0]])).unwrap();
        assert_eq!(dense(&q), vec![vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert_eq!(row_normalize(&m(&[&[0.0, 0.0], &[1.0, 0.0]])), Err(Error::DeadEndRow(0)));
    }

    #[test]
    fn connectivity() {
        assert!(is_strongly_connected(&m(&[&[0.0, 1.0], &[1.0, 0.0]])));
        assert!(!is_strongly_connected(&m(&[&[0.0, 1.0], &[0.0, 0.0]])));
        let path = m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        assert!(is_strongly_connected(&path));
        assert_eq!(strongly_connected_components(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).len(), 2);
    }

    #[test]
    fn periodicity() {
        let two_cycle = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(is_aperiodic(&two_cycle), Ok(false));
        assert_eq!(period(&two_cycle), Ok(2));
        let looped = m(&[&[1.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(is_aperiodic(&looped), Ok(true));
        let three = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(is_aperiodic(&three), Ok(false));
        assert_eq!(period(&three), Ok(3));
        // 3-cycle plus a chord making a 2-cycle: gcd(2, 3) = 1
        let mixed = m(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(is_aperiodic(&mixed), Ok(true));
        assert_eq!(is_aperiodic(&m(&[&[0.0, 1.0], &[0.0, 0.0]])), Err(Error::NotIrreducible));
    }

    #[test]
    fn edge_list_dedup_and_loops() {
        let (g, rep) = DiGraph::from_edges(3, &[(0, 1), (0, 1), (1, 1), (2, 0)]).unwrap();
        assert_eq!(rep, EdgeListReport { duplicates: 1, self_loops: 1 });
        assert_eq!(g.edge_count(), 2);
        assert!(!g.has_self_loops());
        assert!(DiGraph::from_edges(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn bfs_diameter() {
        let three = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(diameter(&three), Some(2));
        assert_eq!(diameter(&m(&[&[0.0, 1.0], &[0.0, 0.0]])), None);
    }
}
