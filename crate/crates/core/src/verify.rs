//! The oracle cross-check suite behind the `verify` command.
//!
//! Each check builds its own random instances from a seed, runs the main
//! implementation and an independent reference from [`crate::oracle`], and
//! records the worst discrepancy against a fixed tolerance.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::features::{build_combinatorial, FeatureMatrix};
use crate::graph::{self, DiGraph};
use crate::markov::{
    commute_times, diameter_bound_check, diglacian, fundamental_matrix_dense, fundamental_matrix_sparse, hitting_times,
    rayleigh_quotient, DiglacianOps, PfprChain, PowerIterationOptions,
};
use crate::oracle;
use crate::sparse::{CsrMatrix, DenseMatrix, Duplicates};

/// Instance counts and sizes for one run of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub fundamental_instances: usize,
    pub fundamental_max_n: usize,
    pub hitting_instances: usize,
    pub hitting_max_n: usize,
    pub walks: usize,
    pub spectrum_instances: usize,
    pub spectrum_max_n: usize,
    pub rayleigh_pairs: usize,
    /// Test hook: adds this much mass to `π̃₀` (then renormalizes) on every
    /// random chain before any check sees it.
    pub perturb_stationary: Option<f64>,
}

impl VerifyConfig {
    /// Sizes used by the acceptance criteria.
    pub fn full(seed: u64) -> Self {
        Self {
            seed,
            fundamental_instances: 50,
            fundamental_max_n: 200,
            hitting_instances: 20,
            hitting_max_n: 30,
            walks: 100_000,
            spectrum_instances: 20,
            spectrum_max_n: 300,
            rayleigh_pairs: 100,
            perturb_stationary: None,
        }
    }

    /// A few seconds' worth of the same checks.
    pub fn quick(seed: u64) -> Self {
        Self {
            fundamental_instances: 8,
            fundamental_max_n: 60,
            hitting_instances: 4,
            walks: 20_000,
            spectrum_instances: 5,
            spectrum_max_n: 80,
            rayleigh_pairs: 20,
            ..Self::full(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Advisory checks are reported but do not decide the overall verdict.
    pub advisory: bool,
    pub instances: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub passed: bool,
    pub fundamental_max_residual: f64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random digraph where every node draws `out_degree` distinct targets.
pub fn random_digraph(n: usize, out_degree: usize, seed: u64) -> DiGraph {
    let mut rng = rng_for(seed, 1);
    let mut edges = Vec::with_capacity(n * out_degree);
    let mut targets: Vec<usize> = (0..n).collect();
    for i in 0..n {
        targets.shuffle(&mut rng);
        edges.extend(targets.iter().filter(|&&j| j != i).take(out_degree).map(|&j| (i, j)));
    }
    DiGraph::from_edges(n, &edges).expect("edges in range").0
}

/// Standard-normal features.
pub fn random_features(n: usize, dim: usize, seed: u64) -> FeatureMatrix {
    let mut rng = rng_for(seed, 2);
    FeatureMatrix::new(DenseMatrix::from_fn(n, dim, |_, _| rng.sample(StandardNormal))).expect("finite features")
}

/// PFPR chain of a sparse random attributed digraph (`k = 2`).
pub fn random_chain(n: usize, seed: u64, opts: PowerIterationOptions) -> Result<PfprChain> {
    let g = random_digraph(n, 2.min(n - 1), seed);
    let x = random_features(n, 8, seed);
    let c = build_combinatorial(&g, &x, 2, seed)?;
    PfprChain::from_combinatorial(&c, opts)
}

/// Chain of a connected undirected graph with self-loops: a random spanning
/// tree plus `n` extra random edges.
pub fn undirected_chain(n: usize, seed: u64, opts: PowerIterationOptions) -> Result<PfprChain> {
    let mut rng = rng_for(seed, 3);
    let mut t = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        t.push((i, j, 1.0));
        t.push((j, i, 1.0));
    }
    for _ in 0..n {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j {
            t.push((i, j, 1.0));
            t.push((j, i, 1.0));
        }
    }
    let a = graph::add_self_loops(&CsrMatrix::from_triplets(n, n, &t, Duplicates::Max)?)?;
    PfprChain::new(graph::row_normalize(&a)?, graph::out_degrees(&a), opts)
}

fn circulant(n: usize, jumps: &[usize], directed: bool) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 1.0));
        for &s in jumps {
            t.push((i, (i + s) % n, 1.0));
            if !directed {
                t.push((i, (i + n - s) % n, 1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t, Duplicates::Max).expect("in range")
}

fn from_undirected_edges(n: usize, edges: &[(usize, usize)]) -> CsrMatrix {
    let mut t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
    for &(a, b) in edges {
        t.push((a, b, 1.0));
        t.push((b, a, 1.0));
    }
    CsrMatrix::from_triplets(n, n, &t, Duplicates::Max).expect("in range")
}

fn hypercube(dim: u32) -> CsrMatrix {
    let n = 1usize << dim;
    let edges: Vec<_> = (0..n).flat_map(|i| (0..dim).map(move |b| (i, i ^ (1 << b)))).collect();
    from_undirected_edges(n, &edges)
}

fn torus(side: usize) -> CsrMatrix {
    let id = |r: usize, c: usize| (r % side) * side + c % side;
    let edges: Vec<_> = (0..side)
        .flat_map(|r| (0..side).flat_map(move |c| [(id(r, c), id(r + 1, c)), (id(r, c), id(r, c + 1))]))
        .collect();
    from_undirected_edges(side * side, &edges)
}

fn petersen() -> CsrMatrix {
    let mut edges = Vec::new();
    for i in 0..5 {
        edges.push((i, (i + 1) % 5));
        edges.push((i, i + 5));
        edges.push((i + 5, (i + 2) % 5 + 5));
    }
    from_undirected_edges(10, &edges)
}

/// Ten regular self-looped graphs with at most 64 nodes.
pub fn regular_instances() -> Vec<(String, CsrMatrix)> {
    let complete = |n: usize| circulant(n, &(1..n).collect::<Vec<_>>(), true);
    vec![
        ("complete-5".into(), complete(5)),
        ("complete-8".into(), complete(8)),
        ("cycle-16".into(), circulant(16, &[1], false)),
        ("directed-cycle-12".into(), circulant(12, &[1], true)),
        ("circulant-32-1-5".into(), circulant(32, &[1, 5], false)),
        ("circulant-64-1-8".into(), circulant(64, &[1, 8], false)),
        ("hypercube-3".into(), hypercube(3)),
        ("hypercube-4".into(), hypercube(4)),
        ("petersen".into(), petersen()),
        ("torus-8x8".into(), torus(8)),
    ]
}

fn perturbed(chain: PfprChain, eps: Option<f64>) -> Result<PfprChain> {
    match eps {
        None => Ok(chain),
        Some(e) => {
            let mut pi = chain.stationary.clone();
            pi[0] += e;
            let s: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|v| *v /= s);
            PfprChain::with_stationary(chain.transition, chain.degrees, pi)
        }
    }
}

fn sizes(count: usize, lo: usize, hi: usize) -> Vec<usize> {
    (0..count).map(|i| if count == 1 { hi } else { lo + i * (hi - lo) / (count - 1) }).collect()
}

struct Acc {
    worst: f64,
    count: usize,
    failures: Vec<String>,
}

impl Acc {
    fn new() -> Self {
        Self { worst: 0.0, count: 0, failures: Vec::new() }
    }

    fn record(&mut self, label: impl FnOnce() -> String, residual: f64, ok: bool) {
        self.count += 1;
        if residual.is_nan() || residual > self.worst {
            self.worst = if residual.is_nan() { f64::INFINITY } else { residual };
        }
        if !ok || residual.is_nan() {
            self.failures.push(label());
        }
    }

    fn finish(self, name: &str, tolerance: f64, advisory: bool, note: String) -> Check {
        let detail = if self.failures.is_empty() {
            note
        } else {
            let shown: Vec<_> = self.failures.iter().take(5).cloned().collect();
            format!("{note}; failing: {}", shown.join(", "))
        };
        Check {
            name: name.into(),
            passed: self.failures.is_empty(),
            advisory,
            instances: self.count,
            max_residual: self.worst,
            tolerance,
            detail,
        }
    }
}

fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sparse vs dense fundamental matrix, plus `Ze = 0` and `π̃ᵀZ = 0`.
pub fn check_fundamental(cfg: &VerifyConfig) -> Result<(Check, Check)> {
    let mut eq = Acc::new();
    let mut ann = Acc::new();
    for (i, n) in sizes(cfg.fundamental_instances, 5, cfg.fundamental_max_n).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(1000 + i as u64);
        let chain = perturbed(random_chain(n, seed, PowerIterationOptions::precise())?, cfg.perturb_stationary)?;
        let dense = fundamental_matrix_dense(&chain)?;
        let (sparse, _) = fundamental_matrix_sparse(&chain, &diglacian(&chain)?, None)?;
        let d = max_abs_diff(&dense, &sparse);
        eq.record(|| format!("n={n} seed={seed}"), d, d < 1e-6);

        let row_sum = (0..n).map(|r| sparse.row(r).sum().abs()).fold(0.0, f64::max);
        let left =
            (0..n).map(|c| (0..n).map(|r| chain.stationary[r] * sparse[(r, c)]).sum::<f64>().abs()).fold(0.0, f64::max);
        let worst = row_sum.max(left);
        ann.record(|| format!("n={n} seed={seed}"), worst, worst < 1e-8);
    }
    Ok((
        eq.finish("fundamental-sparse-vs-dense", 1e-6, false, "max |Z_sparse - Z_dense|".into()),
        ann.finish("fundamental-annihilators", 1e-8, false, "max of |Z e| and |pi^T Z|".into()),
    ))
}

/// Closed-form hitting times against the linear-system and Monte Carlo
/// oracles, plus the symmetric two-state chain.
pub fn check_hitting(cfg: &VerifyConfig) -> Result<(Check, Check, Check)> {
    let mut lin = Acc::new();
    let mut mc = Acc::new();
    for (i, n) in sizes(cfg.hitting_instances, 5, cfg.hitting_max_n).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(2000 + i as u64);
        let chain = perturbed(random_chain(n, seed, PowerIterationOptions::precise())?, cfg.perturb_stationary)?;
        let h = hitting_times(&fundamental_matrix_dense(&chain)?, &chain.stationary)?;
        let p = chain.transition.to_dense();
        for j in 0..n {
            let col = oracle::hitting_linear_system(&p, j)?;
            for (r, &expected) in col.iter().enumerate() {
                let rel = (h[(r, j)] - expected).abs() / expected.abs().max(1.0);
                lin.record(|| format!("n={n} seed={seed} ({r},{j})"), rel, rel < 1e-8);
            }
        }
        let mut rng = rng_for(seed, 4);
        let from = rng.random_range(0..n);
        let to = (from + rng.random_range(1..n)) % n;
        let est = oracle::monte_carlo_hitting(&p, from, to, cfg.walks, seed);
        let sigmas = (h[(from, to)] - est.mean).abs() / est.stderr;
        mc.record(
            || format!("n={n} seed={seed} {from}->{to} ({sigmas:.2} se)"),
            sigmas,
            sigmas <= 3.0 && est.capped == 0,
        );
    }

    let mut two = Acc::new();
    let p = CsrMatrix::from_dense(&DenseMatrix::from_element(2, 2, 0.5));
    let chain = PfprChain::new(p, graph::DegreeVector(vec![2.0, 2.0]), PowerIterationOptions::default())?;
    let h = hitting_times(&fundamental_matrix_dense(&chain)?, &chain.stationary)?;
    let err = (h[(0, 1)] - 2.0).abs().max((h[(1, 0)] - 2.0).abs());
    two.record(|| format!("H = {h}"), err, err == 0.0);
    let c = commute_times(&h);
    let err_c = (c[(0, 1)] - 4.0).abs();
    two.record(|| format!("C01 = {}", c[(0, 1)]), err_c, err_c == 0.0);

    Ok((
        lin.finish("hitting-vs-linear-system", 1e-8, false, "relative error per entry".into()),
        mc.finish("hitting-vs-monte-carlo", 3.0, false, format!("{} walks; residual in standard errors", cfg.walks)),
        two.finish("hitting-two-state", 0.0, false, "H01 = H10 = 2 exactly".into()),
    ))
}

/// Power iteration against the dense solve, both converged and capped at
/// the default 30 steps, and the degree-proportional law on undirected chains.
pub fn check_stationary(cfg: &VerifyConfig) -> Result<(Check, Check, Check)> {
    let mut conv = Acc::new();
    let mut capped = Acc::new();
    let n_chains = cfg.fundamental_instances.max(cfg.spectrum_instances);
    for (i, n) in sizes(n_chains, 5, cfg.spectrum_max_n).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(3000 + i as u64);
        for (acc, opts) in
            [(&mut conv, PowerIterationOptions::precise()), (&mut capped, PowerIterationOptions::default())]
        {
            let chain = perturbed(random_chain(n, seed, opts)?, cfg.perturb_stationary)?;
            let p = chain.transition.to_dense();
            let residual = oracle::stationary_residual(&p, &chain.stationary);
            let reference = oracle::stationary_dense(&p)?;
            let l1: f64 = reference.iter().zip(&chain.stationary).map(|(a, b)| (a - b).abs()).sum();
            let worst = residual.max(l1);
            acc.record(
                || format!("n={n} seed={seed} iterations={} residual={residual:.2e} l1={l1:.2e}", chain.iterations),
                worst,
                worst < 1e-8 && chain.iterations <= opts.max_iter,
            );
        }
    }

    let mut und = Acc::new();
    for (i, n) in sizes(10, 5, 200).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(3500 + i as u64);
        let chain = perturbed(undirected_chain(n, seed, PowerIterationOptions::precise())?, cfg.perturb_stationary)?;
        let total: f64 = chain.degrees.as_slice().iter().sum();
        let err = chain
            .degrees
            .as_slice()
            .iter()
            .zip(&chain.stationary)
            .map(|(d, p)| (d / total - p).abs())
            .fold(0.0, f64::max);
        und.record(|| format!("n={n} seed={seed}"), err, err < 1e-10);
    }
    Ok((
        conv.finish("stationary-power-iteration", 1e-8, false, "max of residual and L1 distance to dense solve".into()),
        capped.finish("stationary-30-iterations", 1e-8, true, "same, with iteration stopped at 30 steps".into()),
        und.finish("stationary-degree-proportional", 1e-10, false, "max |pi_i - d_i / sum d|".into()),
    ))
}

/// Eigen-decomposition of the normalized operator, its eigenvalue interval,
/// agreement with an entrywise dense build, and the complement identity.
pub fn check_spectrum(cfg: &VerifyConfig) -> Result<(Check, Check, Check)> {
    let mut spectrum = Acc::new();
    let mut build = Acc::new();
    let mut comp = Acc::new();
    for (i, n) in sizes(cfg.spectrum_instances, 5, cfg.spectrum_max_n).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add(4000 + i as u64);
        let chain = perturbed(random_chain(n, seed, PowerIterationOptions::precise())?, cfg.perturb_stationary)?;
        let p = chain.transition.to_dense();
        let rep = oracle::dense_operator_check(&p, chain.degrees.as_slice(), &chain.stationary, 1e-9);
        let excess = (rep.box_low - rep.eigen_min).max(rep.eigen_max - rep.box_high).max(0.0);
        let decomposition = rep.orthonormality_residual.max(rep.reconstruction_residual);
        spectrum.record(
            || {
                format!(
                    "n={n} seed={seed} eig=[{:.4}, {:.4}] box=[{:.4}, {:.4}]",
                    rep.eigen_min, rep.eigen_max, rep.box_low, rep.box_high
                )
            },
            excess,
            rep.box_holds && decomposition < 1e-8 && rep.symmetry_residual < 1e-12,
        );

        let ops = DiglacianOps::new(&chain)?;
        let reference = oracle::dense_normalized_diglacian(&p, chain.degrees.as_slice(), &chain.stationary);
        let d = max_abs_diff(&ops.normalized.to_dense(), &reference);
        build.record(|| format!("n={n} seed={seed}"), d, d < 1e-12);

        let inv = chain.degrees.inverse();
        let sum = ops.normalized.linear_combination(1.0, &ops.propagation, 1.0)?.to_dense();
        let d = max_abs_diff(&sum, &DenseMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |r, _| 2.0 * inv[r])));
        comp.record(|| format!("n={n} seed={seed}"), d, d < 1e-10);
    }
    Ok((
        spectrum.finish("spectrum-box", 1e-9, false, "eigenvalue excess beyond [1/d_max - 1, 1/d_min + 1]".into()),
        build.finish("normalized-operator-entrywise", 1e-12, false, "sparse build vs entrywise dense build".into()),
        comp.finish("operator-complement", 1e-10, false, "max |T + T_hat - 2 D^-1|".into()),
    ))
}

/// Definitional vs closed-form Rayleigh quotient.
pub fn check_rayleigh(cfg: &VerifyConfig) -> Result<Check> {
    let mut acc = Acc::new();
    for i in 0..cfg.rayleigh_pairs {
        let seed = cfg.seed.wrapping_add(5000 + i as u64);
        let n = 5 + (i * 7) % 60;
        let chain = perturbed(random_chain(n, seed, PowerIterationOptions::precise())?, cfg.perturb_stationary)?;
        let ops = DiglacianOps::new(&chain)?;
        let mut rng = rng_for(seed, 5);
        let f: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = rayleigh_quotient(&chain, &ops.normalized, &f)?;
        let d = (r.definitional - r.closed_form).abs();
        acc.record(|| format!("n={n} seed={seed}"), d, d < 1e-10);
    }
    Ok(acc.finish("rayleigh-identity", 1e-10, false, "|definitional - closed form|".into()))
}

/// The literal diameter bound and its shifted variant on regular graphs.
/// Advisory: see the README for why the literal form fails.
pub fn check_diameter() -> Result<(Check, Check)> {
    let mut literal = Acc::new();
    let mut shifted = Acc::new();
    for (name, a) in regular_instances() {
        let chain =
            PfprChain::new(graph::row_normalize(&a)?, graph::out_degrees(&a), PowerIterationOptions::precise())?;
        let ops = DiglacianOps::new(&chain)?;
        let b = diameter_bound_check(&chain, &ops.normalized, &a)?;
        let diam = b.diameter.map_or(f64::INFINITY, |d| d as f64);
        let label = |bound: f64| format!("{name}: diameter {diam}, bound {bound}, lambda {:.4}", b.lambda);
        literal.record(|| label(b.bound), diam - b.bound.min(f64::MAX), b.holds);
        shifted.record(|| label(b.shifted_bound), diam - b.shifted_bound, b.shifted_holds);
    }
    Ok((
        literal.finish("diameter-bound", 0.0, true, "residual = diameter - bound".into()),
        shifted.finish("diameter-bound-shifted", 0.0, true, "residual = diameter - bound".into()),
    ))
}

/// Runs every check.
pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let (eq, ann) = check_fundamental(cfg)?;
    let (lin, mc, two) = check_hitting(cfg)?;
    let (st, st30, und) = check_stationary(cfg)?;
    let (spectrum, build, comp) = check_spectrum(cfg)?;
    let ray = check_rayleigh(cfg)?;
    let (lit, shift) = check_diameter()?;
    let fundamental_max_residual = eq.max_residual;
    let checks = vec![eq, ann, lin, mc, two, st, st30, und, spectrum, build, comp, ray, lit, shift];
    let passed = checks.iter().all(|c| c.passed || c.advisory);
    Ok(VerifyReport { config: *cfg, passed, fundamental_max_residual, checks })
}
