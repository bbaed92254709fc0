use nalgebra::SymmetricEigen;
use serde::Serialize;

use super::chain::PfprChain;
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, DenseMatrix};

/// `½(Π^{½}PΠ^{-½} + Π^{-½}PᵀΠ^{½})`, exactly symmetric.
fn symmetrized_walk(chain: &PfprChain) -> Result<CsrMatrix> {
    let s = chain.sqrt_stationary();
    let inv_s = chain.inv_sqrt_stationary();
    let forward = chain.transition.scale(&s, &inv_s);
    let backward = forward.transpose();
    forward.linear_combination(0.5, &backward, 0.5)
}

/// `T̃ = Π(D̃⁻¹ − P)`.
pub fn diglacian(chain: &PfprChain) -> Result<CsrMatrix> {
    let inv_d = chain.degrees.inverse();
    let ones = vec![1.0; chain.n()];
    let shifted = CsrMatrix::from_diagonal(&inv_d).linear_combination(1.0, &chain.transition, -1.0)?;
    Ok(shifted.scale(&chain.stationary, &ones))
}

/// `𝒯 = D̃⁻¹ − ½(Π^{½}PΠ^{-½} + Π^{-½}PᵀΠ^{½})`.
pub fn normalized_diglacian(chain: &PfprChain) -> Result<CsrMatrix> {
    let inv_d = chain.degrees.inverse();
    CsrMatrix::from_diagonal(&inv_d).linear_combination(1.0, &symmetrized_walk(chain)?, -1.0)
}

/// `𝒯̂ = D̃⁻¹ + ½(Π^{½}PΠ^{-½} + Π^{-½}PᵀΠ^{½})`.
pub fn augmented_propagation(chain: &PfprChain) -> Result<CsrMatrix> {
    let inv_d = chain.degrees.inverse();
    CsrMatrix::from_diagonal(&inv_d).linear_combination(1.0, &symmetrized_walk(chain)?, 1.0)
}

/// The three operators built from one chain.
#[derive(Debug, Clone)]
pub struct DiglacianOps {
    pub diglacian: CsrMatrix,
    pub normalized: CsrMatrix,
    pub propagation: CsrMatrix,
}

impl DiglacianOps {
    pub fn new(chain: &PfprChain) -> Result<Self> {
        Ok(Self {
            diglacian: diglacian(chain)?,
            normalized: normalized_diglacian(chain)?,
            propagation: augmented_propagation(chain)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayleighQuotient {
    /// `Σ π_i P_ij (f_i − f_j)² / Σ π_i f_i²`.
    pub definitional: f64,
    /// `2 g (𝒯 + I − D̃⁻¹) gᵀ / g gᵀ` with `g = fᵀΠ^{½}`.
    pub closed_form: f64,
}

pub fn rayleigh_quotient(chain: &PfprChain, normalized: &CsrMatrix, f: &[f64]) -> Result<RayleighQuotient> {
    let n = chain.n();
    if f.len() != n || normalized.shape() != (n, n) {
        return Err(Error::ShapeMismatch("signal length differs from chain size".into()));
    }
    let pi = &chain.stationary;
    let denom: f64 = f.iter().zip(pi).map(|(x, p)| p * x * x).sum();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("signal is identically zero".into()));
    }
    let numer: f64 = chain.transition.triplets().map(|(i, j, p)| pi[i] * p * (f[i] - f[j]).powi(2)).sum();

    let g: Vec<f64> = f.iter().zip(pi).map(|(x, p)| x * p.sqrt()).collect();
    let shift: Vec<f64> = chain.degrees.inverse().iter().map(|v| 1.0 - v).collect();
    let m = normalized.add_diagonal(&shift)?;
    let mg = m.matvec(&g);
    let quad: f64 = g.iter().zip(&mg).map(|(a, b)| a * b).sum();
    let gg: f64 = g.iter().map(|v| v * v).sum();
    Ok(RayleighQuotient { definitional: numer / denom, closed_form: 2.0 * quad / gg })
}

/// Outcome of the spectral diameter bound on a regular graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiameterBound {
    pub degree: f64,
    /// Second-smallest eigenvalue of `𝒯`.
    pub lambda: f64,
    /// `⌊2 max_u log(1/π_u) / log(1/(1 − dλ))⌋ + 1`; NaN or negative when
    /// the logarithm in the denominator is undefined or negative.
    pub bound: f64,
    pub diameter: Option<usize>,
    pub holds: bool,
    /// Same bound with the eigenvalue shifted to the `I − Π^{½}PΠ^{-½}`
    /// symmetrization and `log(2/(2 − λ'))` in the denominator.
    pub shifted_bound: f64,
    pub shifted_holds: bool,
}

/// Evaluates the diameter bound on a chain whose adjacency has constant
/// out-degree. `adjacency` is the self-looped adjacency the chain came from.
pub fn diameter_bound_check(chain: &PfprChain, normalized: &CsrMatrix, adjacency: &CsrMatrix) -> Result<DiameterBound> {
    let d = &chain.degrees;
    if d.is_empty() || (d.max() - d.min()).abs() > 1e-9 * d.max() {
        return Err(Error::NotRegular);
    }
    let degree = d.max();
    let eig = SymmetricEigen::new(normalized.to_dense());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let lambda = if ev.len() > 1 { ev[1] } else { ev[0] };
    let max_log = chain.stationary.iter().map(|p| (1.0 / p).ln()).fold(f64::NEG_INFINITY, f64::max);

    let x = 1.0 - degree * lambda;
    let bound = if x.abs() < 1e-12 { 1.0 } else { (2.0 * max_log / (1.0 / x).ln()).floor() + 1.0 };
    let lambda_shifted = lambda + 1.0 - 1.0 / degree;
    let shifted_bound = (2.0 * max_log / (2.0 / (2.0 - lambda_shifted)).ln()).floor() + 1.0;

    let diameter = crate::graph::diameter(adjacency);
    let within = |b: f64| diameter.is_some_and(|dm| b.is_finite() && b >= dm as f64);
    Ok(DiameterBound {
        degree,
        lambda,
        bound,
        diameter,
        holds: within(bound),
        shifted_bound,
        shifted_holds: within(shifted_bound),
    })
}

/// `[1/d̃_max − 1, 1/d̃_min + 1]`, the interval containing the spectrum of `𝒯`.
pub fn spectrum_box(chain: &PfprChain) -> (f64, f64) {
    (1.0 / chain.degrees.max() - 1.0, 1.0 / chain.degrees.min() + 1.0)
}

/// Dense copy of `𝒯`, for the eigen-decomposition based checks.
pub fn normalized_diglacian_dense(chain: &PfprChain) -> Result<DenseMatrix> {
    Ok(normalized_diglacian(chain)?.to_dense())
}
