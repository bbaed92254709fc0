//! Thick-restart Golub–Kahan–Lanczos bidiagonalization for the leading
//! singular triplets of a linear operator.
//!
//! The recurrence keeps `A P = Q B` with `P`, `Q` orthonormal (full
//! reorthogonalization) and `B` upper triangular. At each restart the `B`
//! factor is decomposed densely; the top Ritz vectors are kept and the
//! residual direction becomes the next right basis vector.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Matrix-free access to `A` and `Aᵀ`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = Aᵀ x`.
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.n_rows()
    }
    fn ncols(&self) -> usize {
        self.n_cols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.vecmat_into(x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    /// Number of leading triplets wanted.
    pub rank: usize,
    /// Krylov basis size; defaults to `max(2·rank, rank + 16)` clamped to
    /// `min(m, n)`.
    pub subspace: Option<usize>,
    /// Relative residual tolerance against the largest Ritz value.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl SvdOptions {
    pub fn new(rank: usize) -> Self {
        Self { rank, subspace: None, tol: 1e-12, max_restarts: 500, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `m × r` left singular vectors.
    pub u: DenseMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `n × r` right singular vectors.
    pub v: DenseMatrix,
    pub restarts: usize,
    pub matvecs: usize,
    /// Largest relative residual among the returned triplets.
    pub max_residual: f64,
}

impl TruncatedSvd {
    /// `V diag(1/σ) Uᵀ` over the singular values above `rel_threshold·σ_max`.
    pub fn pseudo_inverse(&self, rel_threshold: f64) -> DenseMatrix {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..self.singular_values.len())
            .filter(|&i| self.singular_values[i] > rel_threshold * smax && self.singular_values[i] > 0.0)
            .collect();
        let n = self.v.nrows();
        let m = self.u.nrows();
        let mut vs = DenseMatrix::zeros(n, keep.len());
        let mut uk = DenseMatrix::zeros(m, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let inv = 1.0 / self.singular_values[i];
            vs.set_column(c, &(self.v.column(i) * inv));
            uk.set_column(c, &self.u.column(i));
        }
        vs * uk.transpose()
    }

    pub fn rank_above(&self, rel_threshold: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > rel_threshold * smax && s > 0.0).count()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Two passes of classical Gram–Schmidt against `basis`; returns the summed
/// projection coefficients.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, b) in coef.iter_mut().zip(basis) {
            let h = dot(b, v);
            axpy(-h, b, v);
            *c += h;
        }
    }
    coef
}

/// Scales `v` to unit length, then repeats the orthogonalization; dividing by
/// a small norm magnifies whatever rounding survived the first passes.
fn normalize_against(v: &mut [f64], len: f64, basis: &[Vec<f64>]) {
    v.iter_mut().for_each(|x| *x /= len);
    orthogonalize(v, basis);
    let again = norm(v);
    v.iter_mut().for_each(|x| *x /= again);
}

struct SmallSvd {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v: DMatrix<f64>,
}

/// One-sided (Hestenes) Jacobi SVD of a small square matrix, `B = U Σ Vᵀ`.
/// Unsorted; columns of `U` for zero singular values are left at zero.
fn jacobi_svd(b: &DMatrix<f64>) -> SmallSvd {
    let k = b.ncols();
    let mut w: Vec<Vec<f64>> = (0..k).map(|c| b.column(c).iter().copied().collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..k).map(|c| (0..k).map(|r| if r == c { 1.0 } else { 0.0 }).collect()).collect();
    let rotate = |x: &mut Vec<Vec<f64>>, i: usize, j: usize, c: f64, s: f64| {
        for r in 0..x[i].len() {
            let (a, b) = (x[i][r], x[j][r]);
            x[i][r] = c * a - s * b;
            x[j][r] = s * a + c * b;
        }
    };
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = dot(&w[i], &w[i]);
                let beta = dot(&w[j], &w[j]);
                let gamma = dot(&w[i], &w[j]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let singular_values: Vec<f64> = w.iter().map(|col| norm(col)).collect();
    let u = DMatrix::from_fn(k, k, |r, c| if singular_values[c] > 0.0 { w[c][r] / singular_values[c] } else { 0.0 });
    let v = DMatrix::from_fn(k, k, |r, c| v[c][r]);
    SmallSvd { u, singular_values, v }
}

fn random_orthonormal(len: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        orthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Ok(v);
        }
    }
    Err(Error::EigensolverFailure { restarts: 0, matvecs: 0, residual: f64::NAN })
}

/// Leading `rank` singular triplets of `op`.
pub fn truncated_svd<A: LinearOperator + ?Sized>(op: &A, opts: SvdOptions) -> Result<TruncatedSvd> {
    let (m, n) = (op.nrows(), op.ncols());
    let full = m.min(n);
    if opts.rank == 0 || opts.rank > full {
        return Err(Error::InvalidParameter(format!("rank {} outside 1..={full}", opts.rank)));
    }
    let kmax = opts.subspace.unwrap_or_else(|| (2 * opts.rank).max(opts.rank + 16)).clamp(opts.rank, full);
    // keep at least one free slot per restart unless the basis spans everything
    let keep = if kmax == full { opts.rank } else { opts.rank.min(kmax - 1) };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut p: Vec<Vec<f64>> = vec![random_orthonormal(n, &[], &mut rng)?];
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut b = DMatrix::<f64>::zeros(kmax, kmax);
    let mut start = 0;
    let mut matvecs = 0;
    let mut scale = 0.0f64;
    let mut last_residual = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        let mut r = vec![0.0; n];
        let mut beta = 0.0;
        for j in start..kmax {
            let mut qj = vec![0.0; m];
            op.apply(&p[j], &mut qj);
            matvecs += 1;
            let coef = orthogonalize(&mut qj, &q);
            // B[i, j] = q_iᵀ A p_j, including the superdiagonal and restart column
            for (i, c) in coef.into_iter().enumerate() {
                b[(i, j)] = c;
            }
            let alpha = norm(&qj);
            scale = scale.max(alpha);
            if alpha > 1e-14 * scale.max(f64::MIN_POSITIVE) {
                b[(j, j)] = alpha;
                normalize_against(&mut qj, alpha, &q);
            } else {
                b[(j, j)] = 0.0;
                qj = random_orthonormal(m, &q, &mut rng)?;
            }
            q.push(qj);

            r.iter_mut().for_each(|x| *x = 0.0);
            op.apply_transpose(&q[j], &mut r);
            matvecs += 1;
            orthogonalize(&mut r, &p);
            beta = norm(&r);
            scale = scale.max(beta);
            if j + 1 < kmax {
                if beta > 1e-14 * scale.max(f64::MIN_POSITIVE) {
                    let mut next = r.clone();
                    normalize_against(&mut next, beta, &p);
                    p.push(next);
                } else {
                    p.push(random_orthonormal(n, &p, &mut rng)?);
                }
            }
        }

        let svd = jacobi_svd(&b);
        let (bu, bv) = (&svd.u, &svd.v);
        let mut order: Vec<usize> = (0..kmax).collect();
        order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
        let sigma_max = svd.singular_values[order[0]];
        let residual_of = |i: usize| beta * bu[(kmax - 1, i)].abs();
        let worst = order[..opts.rank].iter().map(|&i| residual_of(i)).fold(0.0, f64::max);
        let denom = sigma_max.max(f64::MIN_POSITIVE);
        last_residual = worst / denom;

        let converged = kmax == full || worst <= opts.tol * sigma_max;
        if converged || restart == opts.max_restarts {
            if !converged {
                break;
            }
            let mut u = DenseMatrix::zeros(m, opts.rank);
            let mut v = DenseMatrix::zeros(n, opts.rank);
            let mut values = Vec::with_capacity(opts.rank);
            for (c, &i) in order[..opts.rank].iter().enumerate() {
                for (jj, qv) in q.iter().enumerate() {
                    let w = bu[(jj, i)];
                    for (row, x) in qv.iter().enumerate() {
                        u[(row, c)] += w * x;
                    }
                }
                for (jj, pv) in p.iter().enumerate().take(kmax) {
                    let w = bv[(jj, i)];
                    for (row, x) in pv.iter().enumerate() {
                        v[(row, c)] += w * x;
                    }
                }
                values.push(svd.singular_values[i]);
            }
            return Ok(TruncatedSvd {
                u,
                singular_values: values,
                v,
                restarts: restart,
                matvecs,
                max_residual: last_residual,
            });
        }

        // thick restart: Ritz vectors for the kept triplets, residual direction next
        let mut new_p = Vec::with_capacity(kmax);
        let mut new_q = Vec::with_capacity(kmax);
        let mut new_b = DMatrix::<f64>::zeros(kmax, kmax);
        for (c, &i) in order[..keep].iter().enumerate() {
            let mut pv = vec![0.0; n];
            for (jj, old) in p.iter().enumerate().take(kmax) {
                axpy(bv[(jj, i)], old, &mut pv);
            }
            let mut qv = vec![0.0; m];
            for (jj, old) in q.iter().enumerate() {
                axpy(bu[(jj, i)], old, &mut qv);
            }
            new_p.push(pv);
            new_q.push(qv);
            new_b[(c, c)] = svd.singular_values[i];
        }
        let mut next = r;
        orthogonalize(&mut next, &new_p);
        let nn = norm(&next);
        if nn > 1e-14 * scale {
            normalize_against(&mut next, nn, &new_p);
            new_p.push(next);
        } else {
            new_p.push(random_orthonormal(n, &new_p, &mut rng)?);
        }
        p = new_p;
        q = new_q;
        b = new_b;
        start = keep;
    }
    Err(Error::EigensolverFailure { restarts: opts.max_restarts, matvecs, residual: last_residual })
}
