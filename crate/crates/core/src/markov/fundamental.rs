use serde::Serialize;

use super::chain::PfprChain;
use super::lanczos::{truncated_svd, SvdOptions};
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Largest `n` for which [`FundamentalMethod::Auto`] picks the dense path.
pub const DENSE_LIMIT: usize = 2000;

/// Singular values below this fraction of `σ_max` are treated as zero.
pub const PINV_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FundamentalMethod {
    Dense,
    Sparse,
    #[default]
    Auto,
}

/// `Z = (I − P + eπᵀ)⁻¹ − eπᵀ` by dense LU.
pub fn fundamental_matrix_dense(chain: &PfprChain) -> Result<DenseMatrix> {
    let n = chain.n();
    let pi = &chain.stationary;
    let mut a = -chain.transition.to_dense();
    for i in 0..n {
        a[(i, i)] += 1.0;
        for j in 0..n {
            a[(i, j)] += pi[j];
        }
    }
    let mut z = a.lu().try_inverse().ok_or(Error::SingularSystem)?;
    for i in 0..n {
        for j in 0..n {
            z[(i, j)] -= pi[j];
        }
    }
    Ok(z)
}

/// `M = Π^{-½} T̃ Π^{-½} − D̃⁻¹ + I`.
pub fn pseudo_inverse_operator(chain: &PfprChain, diglacian: &CsrMatrix) -> Result<CsrMatrix> {
    let inv_s = chain.inv_sqrt_stationary();
    let shift: Vec<f64> = chain.degrees.inverse().iter().map(|v| 1.0 - v).collect();
    diglacian.scale(&inv_s, &inv_s).add_diagonal(&shift)
}

/// `I − Π^{½} P Π^{-½}`, algebraically equal to [`pseudo_inverse_operator`].
pub fn simplified_operator(chain: &PfprChain) -> Result<CsrMatrix> {
    let s = chain.sqrt_stationary();
    let inv_s = chain.inv_sqrt_stationary();
    CsrMatrix::identity(chain.n()).linear_combination(1.0, &chain.transition.scale(&s, &inv_s), -1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseReport {
    pub rank_used: usize,
    pub retained: usize,
    pub restarts: usize,
    pub matvecs: usize,
    pub residual: f64,
}

/// `Z = Π^{-½} M† Π^{½}` with `M†` from a truncated SVD of `M`.
///
/// `rank` defaults to `n − 1`, the exact rank of `M` for an irreducible chain.
pub fn fundamental_matrix_sparse(
    chain: &PfprChain,
    diglacian: &CsrMatrix,
    rank: Option<usize>,
) -> Result<(DenseMatrix, SparseReport)> {
    let n = chain.n();
    let m = pseudo_inverse_operator(chain, diglacian)?;
    let rank = rank.unwrap_or(n.saturating_sub(1)).clamp(1, n);
    let mut opts = SvdOptions::new(rank);
    if rank + 1 >= n {
        opts.subspace = Some(n);
    }
    let svd = truncated_svd(&m, opts)?;
    let pinv = svd.pseudo_inverse(PINV_THRESHOLD);
    let s = chain.sqrt_stationary();
    let inv_s = chain.inv_sqrt_stationary();
    let mut z = pinv;
    for i in 0..n {
        for j in 0..n {
            z[(i, j)] *= inv_s[i] * s[j];
        }
    }
    let report = SparseReport {
        rank_used: rank,
        retained: svd.rank_above(PINV_THRESHOLD),
        restarts: svd.restarts,
        matvecs: svd.matvecs,
        residual: svd.max_residual,
    };
    Ok((z, report))
}

/// Dispatches on `method`; `Auto` is dense up to [`DENSE_LIMIT`] nodes.
pub fn fundamental_matrix(chain: &PfprChain, diglacian: &CsrMatrix, method: FundamentalMethod) -> Result<DenseMatrix> {
    let dense = match method {
        FundamentalMethod::Dense => true,
        FundamentalMethod::Sparse => false,
        FundamentalMethod::Auto => chain.n() <= DENSE_LIMIT,
    };
    if dense {
        fundamental_matrix_dense(chain)
    } else {
        fundamental_matrix_sparse(chain, diglacian, None).map(|(z, _)| z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{add_self_loops, out_degrees, row_normalize};
    use crate::markov::chain::PowerIterationOptions;
    use crate::markov::operators::diglacian;
    use crate::sparse::Duplicates;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain_of(edges: &[(usize, usize)], n: usize) -> PfprChain {
        let t: Vec<_> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        let a = add_self_loops(&CsrMatrix::from_triplets(n, n, &t, Duplicates::Max).unwrap()).unwrap();
        PfprChain::new(row_normalize(&a).unwrap(), out_degrees(&a), PowerIterationOptions::precise()).unwrap()
    }

    fn random_chain(n: usize, seed: u64) -> PfprChain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for _ in 0..2 * n {
            edges.push((rng.random_range(0..n), rng.random_range(0..n)));
        }
        edges.retain(|&(a, b)| a != b);
        chain_of(&edges, n)
    }

    #[test]
    fn two_state_closed_form() {
        let c = chain_of(&[(0, 1), (1, 0)], 2);
        let z = fundamental_matrix_dense(&c).unwrap();
        let expect = DenseMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((z - expect).abs().max() < 1e-12);
    }

    #[test]
    fn operator_routes_agree() {
        let c = random_chain(25, 3);
        let m1 = pseudo_inverse_operator(&c, &diglacian(&c).unwrap()).unwrap().to_dense();
        let m2 = simplified_operator(&c).unwrap().to_dense();
        assert!((m1 - m2).abs().max() < 1e-12);
    }

    #[test]
    fn null_vectors_of_operator() {
        let c = random_chain(25, 4);
        let m = simplified_operator(&c).unwrap();
        let s = c.sqrt_stationary();
        assert!(m.matvec(&s).iter().all(|v| v.abs() < 1e-10));
        assert!(m.vecmat(&s).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn sparse_matches_dense() {
        for seed in 0..5 {
            let c = random_chain(40 + seed as usize * 7, seed);
            let zd = fundamental_matrix_dense(&c).unwrap();
            let (zs, rep) = fundamental_matrix_sparse(&c, &diglacian(&c).unwrap(), None).unwrap();
            assert_eq!(rep.retained, c.n() - 1);
            assert!((zd - zs).abs().max() < 1e-6);
        }
    }

    #[test]
    fn sparse_matches_dense_on_small_pfpr_chains() {
        // small chains hit near-breakdowns in the bidiagonalization
        for seed in 0..60u64 {
            let n = 5 + (seed as usize % 8);
            let c = crate::verify::random_chain(n, seed * 31 + 7, PowerIterationOptions::precise()).unwrap();
            let zd = fundamental_matrix_dense(&c).unwrap();
            let (zs, _) = fundamental_matrix_sparse(&c, &diglacian(&c).unwrap(), None).unwrap();
            assert!((zd - zs).abs().max() < 1e-9, "n={n} seed={seed}");
        }
    }
}
