use super::chain::PfprChain;
use super::fundamental::{fundamental_matrix, FundamentalMethod};
use super::operators::diglacian;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// `H_ij = (Z_jj − Z_ij) / π_j`.
pub fn hitting_times(z: &DenseMatrix, stationary: &[f64]) -> Result<DenseMatrix> {
    let n = z.nrows();
    if z.ncols() != n || stationary.len() != n {
        return Err(Error::ShapeMismatch("Z and π disagree in size".into()));
    }
    let mut h = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let zjj = z[(j, j)];
        for i in 0..n {
            if i != j {
                h[(i, j)] = (zjj - z[(i, j)]) / stationary[j];
            }
        }
    }
    Ok(h)
}

/// `C = H + Hᵀ` with a zero diagonal.
pub fn commute_times(h: &DenseMatrix) -> DenseMatrix {
    let mut c = h + h.transpose();
    c.fill_diagonal(0.0);
    c
}

/// Number of off-diagonal entries dropped per row: `⌊μN⌋`, capped at `N − 1`.
pub fn drop_count(n: usize, mu: f64) -> usize {
    ((mu * n as f64 + 1e-9).floor() as usize).min(n.saturating_sub(1))
}

/// Drops the `⌊μN⌋` largest off-diagonal entries of each row and keeps the
/// rest. Among equal values the lower column index survives.
pub fn sparsify_commute(c: &DenseMatrix, mu: f64) -> Result<CsrMatrix> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidParameter(format!("mu must lie in (0, 1), got {mu}")));
    }
    let n = c.nrows();
    let drop = drop_count(n, mu);
    let mut triplets = Vec::with_capacity(n * n.saturating_sub(1 + drop));
    let mut cols: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        cols.clear();
        cols.extend((0..n).filter(|&j| j != i));
        // ascending value, ties by ascending index: the kept prefix prefers low indices
        cols.sort_by(|&a, &b| c[(i, a)].total_cmp(&c[(i, b)]).then(a.cmp(&b)));
        let keep = cols.len() - drop;
        for &j in &cols[..keep] {
            triplets.push((i, j, c[(i, j)]));
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets, crate::sparse::Duplicates::Sum)
}

/// Row-normalized `exp(−𝔠)` over kept entries, shifted by each row's
/// minimum before exponentiation.
pub fn commute_propagation(sparse: &CsrMatrix) -> Result<CsrMatrix> {
    let mut shift = vec![0.0; sparse.n_rows()];
    for (i, s) in shift.iter_mut().enumerate() {
        *s = sparse.row(i).map(|(_, v)| v).fold(f64::INFINITY, f64::min);
        if !s.is_finite() {
            return Err(Error::EmptyRow(i));
        }
    }
    normalize_rows(sparse.map_values(|r, _, v| (-(v - shift[r])).exp()))
}

/// Same as [`commute_propagation`] without the per-row shift.
pub fn commute_propagation_unshifted(sparse: &CsrMatrix) -> Result<CsrMatrix> {
    for i in 0..sparse.n_rows() {
        if sparse.row_nnz(i) == 0 {
            return Err(Error::EmptyRow(i));
        }
    }
    normalize_rows(sparse.map_values(|_, _, v| (-v).exp()))
}

fn normalize_rows(m: CsrMatrix) -> Result<CsrMatrix> {
    let sums = m.row_sums();
    if let Some(i) = sums.iter().position(|&s| !s.is_finite() || s <= 0.0) {
        return Err(Error::EmptyRow(i));
    }
    Ok(m.map_values(|r, _, v| v / sums[r]))
}

/// Everything derived from the fundamental matrix of one chain.
#[derive(Debug, Clone)]
pub struct CommuteModel {
    pub fundamental: DenseMatrix,
    pub hitting: DenseMatrix,
    pub commute: DenseMatrix,
    pub sparsified: CsrMatrix,
    pub propagation: CsrMatrix,
    pub mu: f64,
}

impl CommuteModel {
    pub fn compute(chain: &PfprChain, mu: f64, method: FundamentalMethod) -> Result<Self> {
        let t = diglacian(chain)?;
        let z = fundamental_matrix(chain, &t, method)?;
        Self::from_fundamental(z, &chain.stationary, mu)
    }

    pub fn from_fundamental(fundamental: DenseMatrix, stationary: &[f64], mu: f64) -> Result<Self> {
        let hitting = hitting_times(&fundamental, stationary)?;
        let commute = commute_times(&hitting);
        let sparsified = sparsify_commute(&commute, mu)?;
        let propagation = commute_propagation(&sparsified)?;
        Ok(Self { fundamental, hitting, commute, sparsified, propagation, mu })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_hitting_and_commute() {
        let z = DenseMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        let h = hitting_times(&z, &[0.5, 0.5]).unwrap();
        assert_eq!(h, DenseMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]));
        let c = commute_times(&h);
        assert_eq!(c[(0, 1)], 4.0);
        assert_eq!(c[(1, 0)], 4.0);
    }

    fn ramp(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 + ((i * 7 + j * 3) % 11) as f64 })
    }

    #[test]
    fn drop_counts() {
        let s = sparsify_commute(&ramp(10), 0.5).unwrap();
        for i in 0..10 {
            assert_eq!(s.row_nnz(i), 4);
        }
        let s = sparsify_commute(&ramp(100), 0.97).unwrap();
        for i in 0..100 {
            assert_eq!(s.row_nnz(i), 2);
            assert_eq!(s.get(i, i), 0.0);
        }
        let s = sparsify_commute(&ramp(10), 0.05).unwrap();
        for i in 0..10 {
            assert_eq!(s.row_nnz(i), 9);
        }
    }

    #[test]
    fn ties_keep_lower_index() {
        let c = DenseMatrix::from_row_slice(3, 3, &[0.0, 5.0, 5.0, 5.0, 0.0, 5.0, 5.0, 5.0, 0.0]);
        let s = sparsify_commute(&c, 0.34).unwrap();
        assert_eq!(s.row(0).map(|(j, _)| j).collect::<Vec<_>>(), vec![1]);
        assert_eq!(s.row(1).map(|(j, _)| j).collect::<Vec<_>>(), vec![0]);
        assert_eq!(s.row(2).map(|(j, _)| j).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn propagation_weights() {
        let s =
            CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (0, 2, 2.0), (1, 0, 7.0)], crate::sparse::Duplicates::Sum)
                .unwrap();
        let p = commute_propagation(&s).unwrap();
        let e1 = (-1.0f64).exp();
        let e2 = (-2.0f64).exp();
        assert!((p.get(0, 1) - e1 / (e1 + e2)).abs() < 1e-15);
        assert!((p.get(0, 1) - 0.7311).abs() < 1e-4);
        assert_eq!(p.get(1, 0), 1.0);
        let q = commute_propagation_unshifted(&s).unwrap();
        assert!(p.values().iter().zip(q.values()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn empty_row_rejected() {
        let s = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)], crate::sparse::Duplicates::Sum).unwrap();
        assert_eq!(commute_propagation(&s), Err(Error::EmptyRow(1)));
    }

    #[test]
    fn large_values_survive_shift() {
        let s =
            CsrMatrix::from_triplets(1, 3, &[(0, 1, 2000.0), (0, 2, 2001.0)], crate::sparse::Duplicates::Sum).unwrap();
        let p = commute_propagation(&s).unwrap();
        assert!((p.get(0, 1) - 0.7310585786300049).abs() < 1e-12);
        assert!(commute_propagation_unshifted(&s).is_err());
    }
}
