//! Brute-force reference computations.
//!
//! Nothing here calls into [`crate::markov`] or [`crate::features`]; the
//! routines work on plain dense arrays with their own elimination and
//! sorting so that agreement with the main pipeline is evidence rather than
//! tautology.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::DenseMatrix;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).expect("non-empty range");
        if a[pivot][col].abs() <= 1e-14 * scale {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(row);
                for (dst, &src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *dst -= f * src;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Solves `πᵀ(P − I) = 0`, `Σπ = 1` directly.
pub fn stationary_dense(p: &DenseMatrix) -> Result<Vec<f64>> {
    let n = p.nrows();
    // rows of (P − I)ᵀ, last equation replaced by the normalization
    let mut a: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| p[(j, i)] - if i == j { 1.0 } else { 0.0 }).collect()).collect();
    a[n - 1] = vec![1.0; n];
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    gauss_solve(a, b)
}

/// `‖πᵀP − πᵀ‖₁` on a dense matrix.
pub fn stationary_residual(p: &DenseMatrix, pi: &[f64]) -> f64 {
    (0..p.ncols()).map(|j| ((0..p.nrows()).map(|i| pi[i] * p[(i, j)]).sum::<f64>() - pi[j]).abs()).sum()
}

/// Expected steps to first reach `target` from every state, via the
/// absorbing system `(I − P_{−j,−j}) h = 1`.
pub fn hitting_linear_system(p: &DenseMatrix, target: usize) -> Result<Vec<f64>> {
    let n = p.nrows();
    let others: Vec<usize> = (0..n).filter(|&i| i != target).collect();
    let a: Vec<Vec<f64>> =
        others.iter().map(|&i| others.iter().map(|&j| if i == j { 1.0 } else { 0.0 } - p[(i, j)]).collect()).collect();
    let h = gauss_solve(a, vec![1.0; others.len()])?;
    let mut out = vec![0.0; n];
    for (k, &i) in others.iter().enumerate() {
        out[i] = h[k];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub walks: usize,
    /// Walks that hit the step cap; they are excluded from the mean.
    pub capped: usize,
}

pub const WALK_CAP: usize = 1_000_000;

/// Monte Carlo estimate of the hitting time from `from` to `to`.
///
/// Walk `w` draws from its own ChaCha stream `w`, so the result does not
/// depend on how the walks are scheduled across threads.
pub fn monte_carlo_hitting(p: &DenseMatrix, from: usize, to: usize, walks: usize, seed: u64) -> WalkEstimate {
    let n = p.nrows();
    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            (0..n)
                .map(|j| {
                    acc += p[(i, j)];
                    acc
                })
                .collect()
        })
        .collect();
    let lengths: Vec<Option<usize>> = (0..walks)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            let mut state = from;
            for step in 1..=WALK_CAP {
                let row = &cumulative[state];
                let u: f64 = rng.random::<f64>() * row[n - 1];
                state = row.partition_point(|&c| c <= u).min(n - 1);
                if state == to {
                    return Some(step);
                }
            }
            None
        })
        .collect();
    let done: Vec<f64> = lengths.iter().filter_map(|l| l.map(|v| v as f64)).collect();
    let k = done.len() as f64;
    let mean = done.iter().sum::<f64>() / k;
    let var = done.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    WalkEstimate { mean, stderr: (var / k).sqrt(), walks, capped: walks - done.len() }
}

/// Exact top-`k` neighbours by cosine similarity, ties broken by lower index.
/// Rows of zeros have similarity 0 to everything.
pub fn exact_knn(x: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = x.nrows();
    let norms: Vec<f64> = (0..n).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    (0..n)
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dot: f64 = (0..x.ncols()).map(|c| x[(i, c)] * x[(j, c)]).sum();
                    let s = if norms[i] > 0.0 && norms[j] > 0.0 { dot / (norms[i] * norms[j]) } else { 0.0 };
                    (s, j)
                })
                .collect();
            cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            cand.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorReport {
    pub symmetry_residual: f64,
    pub orthonormality_residual: f64,
    pub reconstruction_residual: f64,
    pub eigen_min: f64,
    pub eigen_max: f64,
    pub box_low: f64,
    pub box_high: f64,
    pub box_holds: bool,
}

/// Dense `𝒯 = D̃⁻¹ − ½(Π^{½}PΠ^{-½} + Π^{-½}PᵀΠ^{½})` built entry by entry.
pub fn dense_normalized_diglacian(p: &DenseMatrix, degrees: &[f64], pi: &[f64]) -> DenseMatrix {
    let n = p.nrows();
    DenseMatrix::from_fn(n, n, |i, j| {
        let walk = 0.5 * ((pi[i] / pi[j]).sqrt() * p[(i, j)] + (pi[j] / pi[i]).sqrt() * p[(j, i)]);
        let diag = if i == j { 1.0 / degrees[i] } else { 0.0 };
        diag - walk
    })
}

/// Eigen-decomposes the dense `𝒯` and checks orthonormality, reconstruction
/// and the interval `[1/d_max − 1, 1/d_min + 1]` (with `slack`).
pub fn dense_operator_check(p: &DenseMatrix, degrees: &[f64], pi: &[f64], slack: f64) -> OperatorReport {
    let t = dense_normalized_diglacian(p, degrees, pi);
    let symmetry_residual = (&t - t.transpose()).abs().max();
    let eig = nalgebra::SymmetricEigen::new(t.clone());
    let u = &eig.eigenvectors;
    let n = t.nrows();
    let orthonormality_residual = (u.transpose() * u - DenseMatrix::identity(n, n)).abs().max();
    let recon = u * DenseMatrix::from_diagonal(&eig.eigenvalues) * u.transpose();
    let reconstruction_residual = (recon - &t).abs().max();
    let eigen_min = eig.eigenvalues.min();
    let eigen_max = eig.eigenvalues.max();
    let dmax = degrees.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dmin = degrees.iter().copied().fold(f64::INFINITY, f64::min);
    let (box_low, box_high) = (1.0 / dmax - 1.0, 1.0 / dmin + 1.0);
    OperatorReport {
        symmetry_residual,
        orthonormality_residual,
        reconstruction_residual,
        eigen_min,
        eigen_max,
        box_low,
        box_high,
        box_holds: eigen_min >= box_low - slack && eigen_max <= box_high + slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> DenseMatrix {
        DenseMatrix::from_element(2, 2, 0.5)
    }

    #[test]
    fn two_state_references() {
        let p = two_state();
        let pi = stationary_dense(&p).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
        assert_eq!(hitting_linear_system(&p, 1).unwrap(), vec![2.0, 0.0]);
        let est = monte_carlo_hitting(&p, 0, 1, 100_000, 3);
        assert!((est.mean - 2.0).abs() < 3.0 * est.stderr, "{est:?}");
        assert_eq!(est.capped, 0);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let p = DenseMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5]);
        let a = monte_carlo_hitting(&p, 0, 2, 5000, 7);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| monte_carlo_hitting(&p, 0, 2, 5000, 7));
        assert_eq!(a, b);
        let h = hitting_linear_system(&p, 2).unwrap();
        assert!((a.mean - h[0]).abs() < 4.0 * a.stderr);
    }

    #[test]
    fn undirected_stationary_is_degree_proportional() {
        // path 0 - 1 - 2 with self-loops: degrees 2, 3, 2
        let p = DenseMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.5, 0.5]);
        let pi = stationary_dense(&p).unwrap();
        for (v, d) in pi.iter().zip([2.0, 3.0, 2.0]) {
            assert!((v - d / 7.0).abs() < 1e-14);
        }
        assert!(stationary_residual(&p, &pi) < 1e-15);
    }

    #[test]
    fn knn_ties_and_full_neighbourhood() {
        let x = DenseMatrix::from_element(5, 2, 1.0);
        assert_eq!(exact_knn(&x, 2)[3], vec![0, 1]);
        let y = DenseMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let all = exact_knn(&y, 2);
        assert_eq!(all[0], vec![2, 1]);
        assert_eq!(all[2].len(), 2);
    }

    #[test]
    fn operator_check_two_state() {
        let r = dense_operator_check(&two_state(), &[2.0, 2.0], &[0.5, 0.5], 1e-9);
        assert!(r.symmetry_residual < 1e-12);
        assert!(r.orthonormality_residual < 1e-8 && r.reconstruction_residual < 1e-8);
        assert!(r.box_holds);
        assert!((r.eigen_min + 0.5).abs() < 1e-12 && (r.eigen_max - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_system_detected() {
        let p = DenseMatrix::identity(2, 2);
        assert_eq!(hitting_linear_system(&p, 1), Err(Error::SingularSystem));
    }
}
