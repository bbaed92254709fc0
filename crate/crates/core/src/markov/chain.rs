use crate::error::{Error, Result};
use crate::features::CombinatorialGraph;
use crate::graph::DegreeVector;
use crate::sparse::{CsrMatrix, DenseMatrix};

/// Residual above which a chain is reported as not converged.
pub const CONVERGENCE_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationOptions {
    /// Upper bound on left multiplications by `P`.
    pub max_iter: usize,
    /// Stop once `‖πᵀP − πᵀ‖₁` falls below this.
    pub tol: f64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self { max_iter: 30, tol: 1e-10 }
    }
}

impl PowerIterationOptions {
    /// Enough iterations to reach rounding level on well-mixing chains.
    pub fn precise() -> Self {
        Self { max_iter: 5000, tol: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub distribution: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl Stationary {
    pub fn converged(&self) -> bool {
        self.residual <= CONVERGENCE_WARN
    }
}

fn l1_residual(p: &CsrMatrix, pi: &[f64], scratch: &mut [f64]) -> f64 {
    p.vecmat_into(pi, scratch);
    scratch.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Left power iteration `π ← πᵀP / ‖πᵀP‖₁` from the uniform vector.
///
/// Stops after `max_iter` multiplications or once the L1 residual of the
/// current iterate drops below `tol`. A residual above [`CONVERGENCE_WARN`]
/// is logged, not returned as an error.
pub fn stationary_distribution(p: &CsrMatrix, opts: PowerIterationOptions) -> Result<Stationary> {
    check_stochastic(p)?;
    let n = p.n_rows();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = l1_residual(p, &pi, &mut next);
    while residual >= opts.tol && iterations < opts.max_iter {
        let total: f64 = next.iter().sum();
        pi.iter_mut().zip(&next).for_each(|(a, b)| *a = b / total);
        iterations += 1;
        residual = l1_residual(p, &pi, &mut next);
    }
    if residual > CONVERGENCE_WARN {
        log::warn!("power iteration stopped at residual {residual:e} after {iterations} iterations");
    }
    Ok(Stationary { distribution: pi, iterations, residual })
}

fn check_stochastic(p: &CsrMatrix) -> Result<()> {
    if !p.is_square() || p.n_rows() == 0 {
        return Err(Error::ShapeMismatch("transition matrix must be square and non-empty".into()));
    }
    if p.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("negative transition probability".into()));
    }
    for (i, s) in p.row_sums().iter().enumerate() {
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("row {i} of P sums to {s}")));
        }
    }
    Ok(())
}

/// `αP + (1 − α)eeᵀ/N` as a dense matrix.
pub fn pagerank_transition(p: &CsrMatrix, alpha: f64) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    check_stochastic(p)?;
    let n = p.n_rows();
    let teleport = (1.0 - alpha) / n as f64;
    let mut out = DenseMatrix::from_element(n, n, teleport);
    for (r, c, v) in p.triplets() {
        out[(r, c)] += alpha * v;
    }
    Ok(out)
}

/// A row-stochastic chain together with the degree vector of the adjacency
/// it came from and its stationary distribution.
#[derive(Debug, Clone)]
pub struct PfprChain {
    pub transition: CsrMatrix,
    pub degrees: DegreeVector,
    pub stationary: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl PfprChain {
    pub fn new(transition: CsrMatrix, degrees: DegreeVector, opts: PowerIterationOptions) -> Result<Self> {
        if degrees.len() != transition.n_rows() {
            return Err(Error::ShapeMismatch("degree vector length differs from P".into()));
        }
        let st = stationary_distribution(&transition, opts)?;
        if st.distribution.iter().any(|&v| v <= 0.0) {
            return Err(Error::NotIrreducible);
        }
        Ok(Self { transition, degrees, stationary: st.distribution, iterations: st.iterations, residual: st.residual })
    }

    pub fn from_combinatorial(g: &CombinatorialGraph, opts: PowerIterationOptions) -> Result<Self> {
        Self::new(g.transition.clone(), g.degrees.clone(), opts)
    }

    /// Builds a chain with a caller-supplied distribution (no iteration).
    pub fn with_stationary(transition: CsrMatrix, degrees: DegreeVector, stationary: Vec<f64>) -> Result<Self> {
        if stationary.len() != transition.n_rows() || degrees.len() != transition.n_rows() {
            return Err(Error::ShapeMismatch("chain component lengths differ".into()));
        }
        let mut scratch = vec![0.0; stationary.len()];
        let residual = l1_residual(&transition, &stationary, &mut scratch);
        Ok(Self { transition, degrees, stationary, iterations: 0, residual })
    }

    pub fn n(&self) -> usize {
        self.transition.n_rows()
    }

    pub fn converged(&self) -> bool {
        self.residual <= CONVERGENCE_WARN
    }

    /// Recomputes `‖πᵀP − πᵀ‖₁` for the stored distribution.
    pub fn stationarity_residual(&self) -> f64 {
        let mut scratch = vec![0.0; self.n()];
        l1_residual(&self.transition, &self.stationary, &mut scratch)
    }

    pub fn sqrt_stationary(&self) -> Vec<f64> {
        self.stationary.iter().map(|v| v.sqrt()).collect()
    }

    pub fn inv_sqrt_stationary(&self) -> Vec<f64> {
        self.stationary.iter().map(|v| 1.0 / v.sqrt()).collect()
    }
}
