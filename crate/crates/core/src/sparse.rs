//! Compressed sparse row matrices over `f64`.
//!
//! Every sparse operator in the pipeline (adjacency, transition matrices,
//! propagation matrices, the sparsified commute matrix) is a [`CsrMatrix`].
//! Column indices are strictly increasing within each row.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix used for the fundamental, hitting and commute matrices.
pub type DenseMatrix = DMatrix<f64>;

/// How duplicate `(row, col)` entries are merged when assembling from triplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplicates {
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating structure.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != n_rows + 1 || indptr[0] != 0 {
            return Err(Error::ShapeMismatch("indptr length must be n_rows + 1 starting at 0".into()));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(Error::ShapeMismatch("indices/values length disagree with indptr".into()));
        }
        for r in 0..n_rows {
            if indptr[r] > indptr[r + 1] {
                return Err(Error::ShapeMismatch(format!("indptr decreases at row {r}")));
            }
            let cols = &indices[indptr[r]..indptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::ShapeMismatch(format!("row {r} columns not strictly increasing")));
            }
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::ShapeMismatch(format!("row {r} has a column out of range")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        Ok(Self { n_rows, n_cols, indptr, indices, values })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, indptr: vec![0; n_rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { n_rows: n, n_cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: diag.to_vec() }
    }

    /// Assembles a matrix from `(row, col, value)` triplets in any order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
        dup: Duplicates,
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::ShapeMismatch(format!("entry ({r}, {c}) outside {n_rows}x{n_cols}")));
            }
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                let slot = values.last_mut().unwrap();
                *slot = match dup {
                    Duplicates::Sum => *slot + v,
                    Duplicates::Max => slot.max(v),
                };
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self::new(n_rows, n_cols, indptr, indices, values)
    }

    /// Keeps every entry of `dense` whose value is not exactly zero.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let (n_rows, n_cols) = dense.shape();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..n_rows {
            for c in 0..n_cols {
                let v = dense[(r, c)];
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { n_rows, n_cols, indptr, indices, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(col, value)` over the stored entries of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, indptr, indices, values }
    }

    /// Applies `f` to every stored value, keeping the sparsity pattern.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.values[k] = f(r, self.indices[k], self.values[k]);
            }
        }
        out
    }

    /// `diag(left) * self * diag(right)`.
    pub fn scale(&self, left: &[f64], right: &[f64]) -> Self {
        assert_eq!(left.len(), self.n_rows);
        assert_eq!(right.len(), self.n_cols);
        self.map_values(|r, c, v| left[r] * v * right[c])
    }

    /// `a * self + b * other`, union of the two patterns.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.merge_with(other, |x, y| a * x + b * y)
    }

    /// Element-wise maximum over the union pattern (missing entries count as 0).
    pub fn elementwise_max(&self, other: &Self) -> Result<Self> {
        self.merge_with(other, f64::max)
    }

    fn merge_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        let mut indptr = Vec::with_capacity(self.n_rows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for r in 0..self.n_rows {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                let (c, v) = match (a.peek(), b.peek()) {
                    (None, None) => break,
                    (Some(&(ca, va)), None) => {
                        a.next();
                        (ca, f(va, 0.0))
                    }
                    (None, Some(&(cb, vb))) => {
                        b.next();
                        (cb, f(0.0, vb))
                    }
                    (Some(&(ca, va)), Some(&(cb, vb))) => {
                        if ca < cb {
                            a.next();
                            (ca, f(va, 0.0))
                        } else if cb < ca {
                            b.next();
                            (cb, f(0.0, vb))
                        } else {
                            a.next();
                            b.next();
                            (ca, f(va, vb))
                        }
                    }
                };
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self { n_rows: self.n_rows, n_cols: self.n_cols, indptr, indices, values })
    }

    /// Adds `diag` to the main diagonal, inserting entries where absent.
    pub fn add_diagonal(&self, diag: &[f64]) -> Result<Self> {
        self.linear_combination(1.0, &Self::from_diagonal(diag), 1.0)
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `self * x` written into `y`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// `xᵀ * self`, returned as a plain vector.
    pub fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        self.vecmat_into(x, &mut y);
        y
    }

    pub fn vecmat_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += xr * v;
            }
        }
    }

    /// `self * dense`.
    pub fn mul_dense(&self, dense: &DenseMatrix) -> DenseMatrix {
        assert_eq!(dense.nrows(), self.n_cols);
        let (n, cols) = (self.n_rows, dense.ncols());
        let mut out = DenseMatrix::zeros(n, cols);
        let src = dense.as_slice();
        let m = self.n_cols;
        let dst = out.as_mut_slice();
        // four columns per sweep so each stored entry is loaded once per block
        let mut j = 0;
        while j + 4 <= cols {
            let s: [&[f64]; 4] = std::array::from_fn(|b| &src[(j + b) * m..(j + b + 1) * m]);
            for r in 0..n {
                let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
                let mut acc = [0.0; 4];
                for (&c, &v) in self.indices[lo..hi].iter().zip(&self.values[lo..hi]) {
                    for b in 0..4 {
                        acc[b] += v * s[b][c];
                    }
                }
                for b in 0..4 {
                    dst[(j + b) * n + r] = acc[b];
                }
            }
            j += 4;
        }
        for j in j..cols {
            let s = &src[j * m..(j + 1) * m];
            for r in 0..n {
                let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
                dst[j * n + r] = self.indices[lo..hi].iter().zip(&self.values[lo..hi]).map(|(&c, &v)| v * s[c]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            out[(r, c)] = v;
        }
        out
    }

    /// Exact structural and numeric symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// Largest absolute deviation from symmetry.
    pub fn symmetry_residual(&self) -> f64 {
        match self.linear_combination(1.0, &self.transpose(), -1.0) {
            Ok(d) => d.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Err(_) => f64::INFINITY,
        }
    }
}
